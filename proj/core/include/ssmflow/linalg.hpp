#pragma once

#include <Eigen/Dense>
#include <complex>
#include <memory>
#include <vector>

namespace ssmflow {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

/// Result of the dense generalized Schur (QZ) reduction of a pencil (A, B):
/// eigenvalues are alpha[i] / beta[i], with beta[i] ~ 0 marking the infinite
/// eigenvalues of a singular pencil.
struct GeneralizedEig {
  VectorXcd alpha;
  VectorXcd beta;
  MatrixXcd vl;  // left eigenvectors (columns), if requested
  MatrixXcd vr;  // right eigenvectors (columns), if requested
};

GeneralizedEig zggev(MatrixXcd a, MatrixXcd b, bool want_left, bool want_right);

/// LU factorization of a dense complex matrix (LAPACK zgetrf) with solves for
/// the matrix itself ('N'), its transpose ('T') or conjugate transpose ('C').
class ZLU {
 public:
  explicit ZLU(MatrixXcd a);

  VectorXcd solve(const VectorXcd& rhs, char trans = 'N') const;
  MatrixXcd solve_mat(const MatrixXcd& rhs, char trans = 'N') const;
  /// Reciprocal condition estimate (1-norm), ~0 for singular factors.
  double rcond() const;
  Eigen::Index rows() const { return lu_.rows(); }

 private:
  MatrixXcd lu_;
  std::vector<int> ipiv_;
  double anorm_ = 0.0;
  bool singular_ = false;
};

}  // namespace ssmflow
