#include "ssmflow/eigensolver.hpp"

#include <algorithm>
#include <cmath>

#include "ssmflow/errors.hpp"
#include "ssmflow/linalg.hpp"
#include "ssmflow/state.hpp"

namespace ssmflow {

namespace {

double pair_residual(const OperatorPair& ops, Complex lambda,
                     const VectorXcd& k) {
  return (ops.apply_a(k) - lambda * ops.apply_m(k)).norm() / k.norm();
}

// Magnitude cutoff separating genuine finite eigenvalues from the roundoff
// offspring of the infinite (higher-index) part of a singular pencil. The
// finite spectrum is bounded by ~ ||A|| / ||M||-restricted; the perturbed
// infinite pairs land orders of magnitude higher (~ scale / sqrt(eps)).
double lambda_cutoff(const MatrixXcd& A, const MatrixXcd& M) {
  const double na = A.cwiseAbs().colwise().sum().maxCoeff();
  const double nm = M.cwiseAbs().colwise().sum().maxCoeff();
  if (nm <= 0.0) return 0.0;  // fully algebraic block: no finite spectrum
  return 1e3 * na / nm;
}

// Dense QZ of one pencil; finite eigenvalues only. Infinite eigenvalues of
// the singular pencil are recognized on the chordal metric plus the
// magnitude cutoff above.
void dense_block_eig(const MatrixXcd& A, const MatrixXcd& M,
                     std::vector<std::pair<Complex, VectorXcd>>& out) {
  GeneralizedEig ge = zggev(A, M, false, true);
  const double cutoff = lambda_cutoff(A, M);
  for (Eigen::Index i = 0; i < ge.alpha.size(); ++i) {
    const double a = std::abs(ge.alpha[i]);
    const double b = std::abs(ge.beta[i]);
    if (b <= 1e-12 * std::hypot(a, b)) continue;  // infinite eigenvalue
    const Complex lam = ge.alpha[i] / ge.beta[i];
    if (!std::isfinite(lam.real()) || !std::isfinite(lam.imag())) continue;
    if (std::abs(lam) > cutoff) continue;
    out.emplace_back(lam, ge.vr.col(i));
  }
}

// Shift-invert Arnoldi on op(x) = (A - sigma M)^{-1} (M x), full
// reorthogonalization, no restarts (desk-scale subspaces).
std::vector<std::pair<Complex, VectorXcd>> arnoldi_eig(const OperatorPair& ops,
                                                       Complex sigma, int count,
                                                       const EigOptions& opt) {
  ShiftedFactor fac(ops, sigma);
  if (fac.rcond_min() < 1e-14)
    throw EigenError(
        "factorization failed at the requested shift; retry with a perturbed "
        "sigma");
  const Eigen::Index n = ops.dim();
  const int m = std::min<Eigen::Index>(
      std::min<Eigen::Index>(2 * count + opt.arnoldi_extra, opt.arnoldi_max_dim),
      n);

  MatrixXcd V(n, m + 1);
  MatrixXcd H = MatrixXcd::Zero(m + 1, m);
  // deterministic start vector
  VectorXcd v0(n);
  for (Eigen::Index i = 0; i < n; ++i)
    v0[i] = Complex(std::cos(0.7 * double(i + 1)), std::sin(0.3 * double(i + 1)));
  V.col(0) = v0 / v0.norm();

  int built = 0;
  for (int j = 0; j < m; ++j) {
    VectorXcd w = fac.solve(ops.apply_m(V.col(j)), VectorXcd());
    // modified Gram-Schmidt, twice
    for (int pass = 0; pass < 2; ++pass)
      for (int i = 0; i <= j; ++i) {
        const Complex h = V.col(i).dot(w);
        w -= h * V.col(i);
        H(i, j) += h;
      }
    const double hn = w.norm();
    H(j + 1, j) = hn;
    built = j + 1;
    if (hn < 1e-13) break;
    V.col(j + 1) = w / hn;
  }

  const MatrixXcd Hm = H.topLeftCorner(built, built);
  Eigen::ComplexEigenSolver<MatrixXcd> es(Hm);
  const double cutoff = ops.structured
                            ? 0.0  // structured pencils take the dense path
                            : lambda_cutoff(ops.a, ops.m);
  std::vector<std::pair<Complex, VectorXcd>> out;
  for (int i = 0; i < built; ++i) {
    const Complex mu = es.eigenvalues()[i];
    if (std::abs(mu) < opt.infinite_tol) continue;  // infinite pencil eigenvalue
    const Complex lam = sigma + 1.0 / mu;
    if (cutoff > 0.0 && std::abs(lam) > cutoff) continue;
    VectorXcd k = V.leftCols(built) * es.eigenvectors().col(i);
    out.emplace_back(lam, std::move(k));
  }
  return out;
}

}  // namespace

Complex default_shift(const SpectrumBoundConstants& sb) {
  const double scale = std::max(sb.c_const, 1.0);
  return Complex(1.0, 0.5) * scale;
}

std::vector<EigenPair> solve_generalized_eig(const OperatorPair& ops,
                                             Complex shift, int count,
                                             const EigOptions& opt) {
  std::vector<std::pair<Complex, VectorXcd>> raw;

  if (ops.structured && !opt.force_arnoldi) {
    for (int n = -ops.grid.n1; n <= ops.grid.n1; ++n) {
      const size_t bi = size_t(n + ops.grid.n1);
      std::vector<std::pair<Complex, VectorXcd>> blk;
      if (ops.a_blk[bi].rows() <= opt.dense_threshold) {
        dense_block_eig(ops.a_blk[bi], ops.m_blk[bi], blk);
      } else {
        OperatorPair sub(ops.a_blk[bi], ops.m_blk[bi]);
        for (auto& p : arnoldi_eig(sub, shift, count, opt))
          blk.push_back(std::move(p));
      }
      for (auto& [lam, kb] : blk) {
        VectorXcd k = VectorXcd::Zero(ops.dim());
        ops.scatter(kb, n, k);
        raw.emplace_back(lam, std::move(k));
      }
    }
  } else if (ops.dim() <= opt.dense_threshold && !opt.force_arnoldi) {
    try {
      dense_block_eig(ops.a_dense(), ops.m_dense(), raw);
    } catch (const EigenError&) {
      throw;
    }
  } else {
    raw = arnoldi_eig(ops, shift, count, opt);
  }

  std::vector<EigenPair> out;
  for (auto& [lam, k] : raw) {
    if (pair_residual(ops, lam, k) >= opt.residual_tol) continue;
    out.push_back({lam, k / k.norm()});
  }
  std::sort(out.begin(), out.end(), [](const EigenPair& a, const EigenPair& b) {
    if (a.lambda.real() != b.lambda.real())
      return a.lambda.real() > b.lambda.real();
    return a.lambda.imag() > b.lambda.imag();
  });
  if (count > 0 && int(out.size()) > count) out.resize(size_t(count));
  return out;
}

namespace {

// One inverse-iteration polish of a right/left eigenpair about lambda.
void polish_pair(const OperatorPair& ops, Complex lambda, VectorXcd& right,
                 VectorXcd& left) {
  const double scale = std::max(1.0, std::abs(lambda));
  ShiftedFactor fac(ops, lambda + 1e-8 * scale);
  for (int it = 0; it < 2; ++it) {
    VectorXcd r = fac.solve(ops.apply_m(right), VectorXcd());
    right = r / r.norm();
    VectorXcd l = fac.solve_adjoint(ops.apply_m_adj(left));
    left = l / l.norm();
  }
}

}  // namespace

SpectralSplit split_spectrum(const std::vector<EigenPair>& eigs,
                             const OperatorPair& ops, double beta_split,
                             const SplitOptions& opt) {
  SpectralSplit sp;
  sp.beta_split = beta_split;

  for (const auto& e : eigs)
    if (std::abs(e.lambda.real() - beta_split) < opt.gap_tol)
      throw EigenError("split rejected: eigenvalue " +
                       std::to_string(e.lambda.real()) + " + " +
                       std::to_string(e.lambda.imag()) +
                       "i lies inside the gap band around beta_split");

  std::vector<EigenPair> members;
  for (const auto& e : eigs) {
    if (e.lambda.real() > beta_split)
      members.push_back(e);
    else
      sp.sigma2_values.push_back(e.lambda);
  }
  if (members.empty())
    throw EigenError(
        "split rejected: Sigma1 is empty (beta_split above max Re lambda)");

  // order by descending imaginary part so conjugate partners are adjacent
  std::sort(members.begin(), members.end(),
            [](const EigenPair& a, const EigenPair& b) {
              if (a.lambda.imag() != b.lambda.imag())
                return a.lambda.imag() > b.lambda.imag();
              return a.lambda.real() > b.lambda.real();
            });

  const EnergyFn energy =
      opt.energy ? opt.energy
                 : EnergyFn([](const VectorXcd& x) { return 0.5 * x.squaredNorm(); });
  const bool grid_structure = ops.structured || ops.grid.full_size() == ops.dim();

  std::vector<int> partner(members.size(), -1);
  for (size_t i = 0; i < members.size(); ++i) {
    if (partner[i] >= 0) continue;
    for (size_t j = i + 1; j < members.size(); ++j) {
      if (partner[j] >= 0) continue;
      if (std::abs(members[j].lambda - std::conj(members[i].lambda)) <
          1e-8 * (1.0 + std::abs(members[i].lambda))) {
        partner[i] = int(j);
        partner[j] = int(i);
        break;
      }
    }
  }

  sp.sigma1.resize(members.size());
  for (size_t i = 0; i < members.size(); ++i) {
    if (partner[i] >= 0 && int(i) > partner[i] && grid_structure) {
      // canonical conjugate partner: exact reflection of the computed mate
      const auto& mate = sp.sigma1[size_t(partner[i])];
      SpectralMode m;
      m.lambda = std::conj(mate.lambda);
      m.right = conj_reflect(ops.grid, mate.right);
      m.left = conj_reflect(ops.grid, mate.left);
      sp.sigma1[i] = std::move(m);
      continue;
    }
    SpectralMode m;
    m.lambda = members[i].lambda;
    m.right = members[i].right;
    m.left = members[i].right;  // seed for inverse iteration
    polish_pair(ops, m.lambda, m.right, m.left);
    // normalize the right vector to unit discrete energy, e(k) = 1/2
    const double en = energy(m.right);
    if (!(en > 0.0)) throw EigenError("eigenvector has zero energy norm");
    m.right /= std::sqrt(2.0 * en);
    // then fix the left vector by zeta^H M k = 1
    const Complex g = m.left.dot(ops.apply_m(m.right));
    if (std::abs(g) < 1e-13)
      throw EigenError("left/right eigenvectors are M-orthogonal (defective pencil?)");
    m.left /= std::conj(g);
    sp.sigma1[i] = std::move(m);
  }

  // cross-biorthonormality check
  for (size_t i = 0; i < sp.sigma1.size(); ++i)
    for (size_t j = 0; j < sp.sigma1.size(); ++j) {
      const Complex v = sp.sigma1[i].left.dot(ops.apply_m(sp.sigma1[j].right));
      const double target = (i == j) ? 1.0 : 0.0;
      if (std::abs(v - target) > opt.biorth_tol * 10.0)
        throw EigenError("biorthonormality failure between Sigma1 modes " +
                         std::to_string(i) + " and " + std::to_string(j));
    }

  sp.r1 = MatrixXcd::Zero(Eigen::Index(sp.sigma1.size()),
                          Eigen::Index(sp.sigma1.size()));
  for (size_t i = 0; i < sp.sigma1.size(); ++i)
    sp.r1(Eigen::Index(i), Eigen::Index(i)) = sp.sigma1[i].lambda;
  return sp;
}

}  // namespace ssmflow
