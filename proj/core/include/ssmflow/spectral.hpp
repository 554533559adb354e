#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace ssmflow {

using Complex = std::complex<double>;
using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

/// Discretization descriptor for the Fourier-Chebyshev basis.
///
/// Streamwise modes are stored for n = 0..n1 only; negative modes are implied
/// by the reality condition v_{-n,m} = conj(v_{n,m}). Wall-normal profiles are
/// Chebyshev coefficient vectors of degree n2. Fields per mode: 3 for a
/// Newtonian fluid (u1, u2, p), 6 with the polymer stresses (T11, T12, T22).
struct ModeGrid {
  double k = 1.0;   // streamwise wavenumber
  int n1 = 1;       // Fourier modes n = 0..n1
  int n2 = 4;       // Chebyshev degrees m = 0..n2
  int nfields = 3;  // fields per mode

  int cheb() const { return n2 + 1; }
  int modes_half() const { return n1 + 1; }
  int modes_full() const { return 2 * n1 + 1; }

  // stored (half) layout: coefficient vector only, f and c live beside it
  Index half_coeff_size() const {
    return Index(nfields) * modes_half() * cheb();
  }
  // total unknown count of the discretized system
  Index half_size() const { return half_coeff_size() + 2; }

  // complexified (full) layout: blocks n = -n1..n1 followed by the f, c slots
  Index full_size() const {
    return Index(nfields) * modes_full() * cheb() + 2;
  }
  Index full_index(int n, int field, int m) const {
    return (Index(n + n1) * nfields + field) * cheb() + m;
  }
  Index half_index(int n, int field, int m) const {
    return (Index(n) * nfields + field) * cheb() + m;
  }
  Index block_start(int n) const { return Index(n + n1) * nfields * cheb(); }
  Index block_len() const { return Index(nfields) * cheb(); }
  Index f_slot() const { return full_size() - 2; }
  Index c_slot() const { return full_size() - 1; }

  double fourier_norm() const;  // sqrt(k / 2 pi)

  /// Throws ConfigError when an invariant (k > 0, n1 >= 1, n2 >= 4,
  /// nfields in {3,6}) is violated.
  void validate() const;
};

// Field indices within a mode block.
enum Field : int { FU1 = 0, FU2 = 1, FP = 2, FT11 = 3, FT12 = 4, FT22 = 5 };

/// Chebyshev collocation tables on the Gauss-Lobatto points.
///
/// eval(s,m) = T_m(x_s); d1 and d2 hold the first and second derivatives of
/// T_m at x_s, built from the polynomial recurrence (exact, no finite
/// differences). `moments` are the exact integrals of T_m over [-1,1] and
/// `weights` the induced quadrature rule on the collocation points (exact for
/// polynomials of degree <= n2).
struct ChebMatrices {
  VectorXd points;
  MatrixXd eval;
  MatrixXd d1;
  MatrixXd d2;
  VectorXd moments;
  VectorXd weights;

  int n2() const { return int(points.size()) - 1; }
};

/// Gauss-Lobatto abscissae x_s = cos(s pi / n2), s = 0..n2.
VectorXd gauss_lobatto_points(int n2);

ChebMatrices cheb_matrices(int n2);

/// Evaluation table of T_m, m = 0..n2, at arbitrary abscissae.
MatrixXd cheb_eval_at(int n2, const VectorXd& x);
MatrixXd cheb_deriv_at(int n2, const VectorXd& x);

/// Quadrature weights for \int_{-1}^{1} f dx given samples at `points`
/// (Clenshaw-Curtis construction through the interpolant).
VectorXd clenshaw_curtis_weights(const ChebMatrices& cheb);

struct PhysicalField {
  VectorXd x1;                   // uniform grid on [0, 2 pi / k)
  VectorXd x2;                   // Gauss-Lobatto points
  std::vector<MatrixXd> fields;  // nfields arrays, nx x (n2+1)
};

class StateVector;

/// Reconstructs real-valued physical fields from a stored coefficient state
/// using the conjugate symmetry v_{-n,m} = conj(v_{n,m}).
PhysicalField to_physical(const ModeGrid& grid, const ChebMatrices& cheb,
                          const StateVector& state, int nx);

}  // namespace ssmflow
