#pragma once

#include <functional>
#include <vector>

#include "ssmflow/flow_models.hpp"

namespace ssmflow {

struct EigenPair {
  Complex lambda;
  VectorXcd right;
};

struct EigOptions {
  Eigen::Index dense_threshold = 6000;  // per solve block
  int arnoldi_extra = 20;               // subspace = 2 count + extra
  int arnoldi_max_dim = 400;
  double residual_tol = 1e-8;
  double infinite_tol = 1e-10;  // |mu| filter on the shift-inverted spectrum
  bool force_arnoldi = false;   // tests
};

/// Finite spectrum of the singular pencil A x = lambda M x.
///
/// Blocks (or the dense pencil) of dimension <= dense_threshold go through
/// the dense generalized Schur reduction; larger ones through shift-invert
/// Arnoldi on (A - sigma M)^{-1} M with full reorthogonalization, recovering
/// lambda = sigma + 1/mu and discarding mu ~ 0. Each returned pair satisfies
/// ||A k - lambda M k|| / ||k|| < residual_tol. Results are sorted by
/// descending real part; `count <= 0` returns everything the solver found.
std::vector<EigenPair> solve_generalized_eig(const OperatorPair& ops,
                                             Complex shift, int count,
                                             const EigOptions& opt = {});

/// Default shift right of the spectrum, scaled by the bound estimate
/// omega0 ~ c_const (Re lambda <= omega0).
Complex default_shift(const SpectrumBoundConstants& sb);

struct SpectralMode {
  Complex lambda;
  VectorXcd right;
  VectorXcd left;  // zeta, normalized so that zeta^H M right = 1
};

struct SpectralSplit {
  double beta_split = 0.0;
  std::vector<SpectralMode> sigma1;
  std::vector<Complex> sigma2_values;
  MatrixXcd r1;  // reduced linear part; diagonal of Sigma1 eigenvalues unless
                 // a Jordan structure is supplied by the caller
  int r() const { return int(sigma1.size()); }
};

using EnergyFn = std::function<double(const VectorXcd&)>;

struct SplitOptions {
  double gap_tol = 1e-4;
  double biorth_tol = 1e-10;
  /// Right-eigenvector normalization; defaults to Euclidean energy
  /// 0.5 ||x||^2 = 0.5. Flow callers pass the discrete kinetic energy.
  EnergyFn energy;
};

/// Partitions the computed spectrum at beta_split, solves the adjoint
/// problem for the Sigma1 left eigenvectors and rescales for
/// biorthonormality zeta_i^H M k_j = delta_ij. Conjugate pairs are
/// canonicalized: the partner of a mode is its exact conjugate reflection
/// when the pencil has grid structure.
SpectralSplit split_spectrum(const std::vector<EigenPair>& eigs,
                             const OperatorPair& ops, double beta_split,
                             const SplitOptions& opt = {});

}  // namespace ssmflow
