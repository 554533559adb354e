#include "ssmflow/linalg.hpp"

#include <lapacke.h>

#include "ssmflow/errors.hpp"

namespace ssmflow {

static_assert(sizeof(lapack_int) == sizeof(int),
              "ZLU stores pivots as int; build expects LP64 LAPACK");

namespace {
lapack_complex_double* lp(MatrixXcd& m) {
  return reinterpret_cast<lapack_complex_double*>(m.data());
}
lapack_complex_double* lp(VectorXcd& v) {
  return reinterpret_cast<lapack_complex_double*>(v.data());
}
}  // namespace

GeneralizedEig zggev(MatrixXcd a, MatrixXcd b, bool want_left, bool want_right) {
  const lapack_int n = lapack_int(a.rows());
  if (a.cols() != n || b.rows() != n || b.cols() != n)
    throw EigenError("zggev: pencil matrices must be square and same size");

  GeneralizedEig out;
  out.alpha.resize(n);
  out.beta.resize(n);
  if (want_left) out.vl.resize(n, n);
  if (want_right) out.vr.resize(n, n);

  MatrixXcd dummy(1, 1);
  const lapack_int info = LAPACKE_zggev(
      LAPACK_COL_MAJOR, want_left ? 'V' : 'N', want_right ? 'V' : 'N', n,
      lp(a), n, lp(b), n, lp(out.alpha), lp(out.beta),
      want_left ? lp(out.vl) : lp(dummy), want_left ? n : 1,
      want_right ? lp(out.vr) : lp(dummy), want_right ? n : 1);
  if (info != 0)
    throw EigenError("zggev failed with info = " + std::to_string(info));
  return out;
}

ZLU::ZLU(MatrixXcd a) : lu_(std::move(a)), ipiv_(size_t(lu_.rows())) {
  const lapack_int n = lapack_int(lu_.rows());
  if (lu_.cols() != n) throw SolverError("ZLU: matrix must be square");
  anorm_ = lu_.cwiseAbs().colwise().sum().maxCoeff();
  const lapack_int info =
      LAPACKE_zgetrf(LAPACK_COL_MAJOR, n, n, lp(lu_), n,
                     reinterpret_cast<lapack_int*>(ipiv_.data()));
  if (info < 0) throw SolverError("zgetrf: illegal argument");
  singular_ = info > 0;
}

VectorXcd ZLU::solve(const VectorXcd& rhs, char trans) const {
  if (singular_) throw SolverError("LU solve on an exactly singular factorization");
  VectorXcd x = rhs;
  const lapack_int n = lapack_int(lu_.rows());
  const lapack_int info = LAPACKE_zgetrs(
      LAPACK_COL_MAJOR, trans, n, 1,
      reinterpret_cast<const lapack_complex_double*>(lu_.data()), n,
      reinterpret_cast<const lapack_int*>(ipiv_.data()), lp(x), n);
  if (info != 0) throw SolverError("zgetrs failed");
  return x;
}

MatrixXcd ZLU::solve_mat(const MatrixXcd& rhs, char trans) const {
  if (singular_) throw SolverError("LU solve on an exactly singular factorization");
  MatrixXcd x = rhs;
  const lapack_int n = lapack_int(lu_.rows());
  const lapack_int info = LAPACKE_zgetrs(
      LAPACK_COL_MAJOR, trans, n, lapack_int(x.cols()),
      reinterpret_cast<const lapack_complex_double*>(lu_.data()), n,
      reinterpret_cast<const lapack_int*>(ipiv_.data()), lp(x), n);
  if (info != 0) throw SolverError("zgetrs failed");
  return x;
}

double ZLU::rcond() const {
  if (singular_) return 0.0;
  double rc = 0.0;
  MatrixXcd tmp = lu_;
  const lapack_int info =
      LAPACKE_zgecon(LAPACK_COL_MAJOR, '1', lapack_int(lu_.rows()), lp(tmp),
                     lapack_int(lu_.rows()), anorm_, &rc);
  if (info != 0) throw SolverError("zgecon failed");
  return rc;
}

}  // namespace ssmflow
