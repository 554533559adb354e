#pragma once

#include "ssmflow/spectral.hpp"

namespace ssmflow {

/// Stacked complex coefficient vector for all stored Fourier modes plus the
/// two auxiliary scalars: the forcing amplitude f (pressure-gradient
/// surrogate) and the phase speed c.
class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(const ModeGrid& grid)
      : coeffs(VectorXcd::Zero(grid.half_coeff_size())) {}

  VectorXcd coeffs;
  double f = 0.0;
  double c = 0.0;

  Complex& at(const ModeGrid& g, int n, int field, int m) {
    return coeffs[g.half_index(n, field, m)];
  }
  Complex at(const ModeGrid& g, int n, int field, int m) const {
    return coeffs[g.half_index(n, field, m)];
  }
};

/// Layout check; throws ConfigError on size mismatch.
void check_layout(const ModeGrid& grid, const StateVector& state);

/// Largest imaginary part among the n = 0 coefficients (the self-conjugate
/// block must be real for physical states).
double mode_zero_imag_norm(const ModeGrid& grid, const StateVector& state);

/// Complexified representation on the full mode range n = -n1..n1 with the
/// f, c slots appended; negative modes filled by conjugation.
VectorXcd embed_full(const ModeGrid& grid, const StateVector& state);

/// Inverse of embed_full. `asym_out`, when given, receives the magnitude of
/// the conjugate-symmetry defect that was averaged away.
StateVector extract_half(const ModeGrid& grid, const VectorXcd& full,
                         double* asym_out = nullptr);

/// Projects a full vector onto the conjugate-symmetric subspace in place and
/// forces the auxiliary slots real.
void symmetrize_full(const ModeGrid& grid, VectorXcd& full);

/// Conjugation-reflection C: (C u)_n = conj(u_{-n}), aux slots conjugated.
/// Commutes with the linearized operator of any real base state.
VectorXcd conj_reflect(const ModeGrid& grid, const VectorXcd& full);

}  // namespace ssmflow
