#include "ssmflow/flow_models.hpp"

#include <algorithm>
#include <cmath>

#include "ssmflow/errors.hpp"
#include "ssmflow/newton.hpp"

namespace ssmflow {

void ModelParams::validate(int nfields) const {
  if (!(re >= 0.0)) throw ConfigError("params.re must be >= 0");
  if (nfields == 3 && !(re > 0.0))
    throw ConfigError("params.re must be > 0 for the Newtonian model");
  if (!(beta_visc >= 0.0 && beta_visc <= 1.0))
    throw ConfigError("params.beta_visc must lie in [0, 1]");
  if (!(eps >= 0.0)) throw ConfigError("params.eps must be >= 0");
  if (nfields == 6 && !(wi > 0.0))
    throw ConfigError("params.wi must be > 0 for the Oldroyd-B model");
  if (!(xhat2 > -1.0 && xhat2 < 1.0))
    throw ConfigError("params.xhat2 must lie in (-1, 1)");
}

// --- OperatorPair -----------------------------------------------------------

OperatorPair::OperatorPair(MatrixXcd a_in, MatrixXcd m_in)
    : structured(false), a(std::move(a_in)), m(std::move(m_in)) {
  if (a.rows() != a.cols() || m.rows() != a.rows() || m.cols() != a.rows())
    throw ConfigError("OperatorPair: pencil matrices must be square, same size");
  dim_ = a.rows();
}

Eigen::Index OperatorPair::block_rows(int n) const {
  return grid.block_len() + (n == 0 ? 2 : 0);
}

VectorXcd OperatorPair::gather(const VectorXcd& x, int n) const {
  VectorXcd xb(block_rows(n));
  xb.head(grid.block_len()) = x.segment(grid.block_start(n), grid.block_len());
  if (n == 0) xb.tail(2) = x.tail(2);
  return xb;
}

void OperatorPair::scatter(const VectorXcd& xb, int n, VectorXcd& x) const {
  x.segment(grid.block_start(n), grid.block_len()) = xb.head(grid.block_len());
  if (n == 0) x.tail(2) = xb.tail(2);
}

VectorXcd OperatorPair::apply_a(const VectorXcd& x) const {
  if (!structured) return a * x;
  VectorXcd y = VectorXcd::Zero(dim_);
  for (int n = -grid.n1; n <= grid.n1; ++n)
    scatter(a_blk[size_t(n + grid.n1)] * gather(x, n), n, y);
  return y;
}

VectorXcd OperatorPair::apply_m(const VectorXcd& x) const {
  if (!structured) return m * x;
  VectorXcd y = VectorXcd::Zero(dim_);
  for (int n = -grid.n1; n <= grid.n1; ++n)
    scatter(m_blk[size_t(n + grid.n1)] * gather(x, n), n, y);
  return y;
}

VectorXcd OperatorPair::apply_a_adj(const VectorXcd& x) const {
  if (!structured) return a.adjoint() * x;
  VectorXcd y = VectorXcd::Zero(dim_);
  for (int n = -grid.n1; n <= grid.n1; ++n)
    scatter(a_blk[size_t(n + grid.n1)].adjoint() * gather(x, n), n, y);
  return y;
}

VectorXcd OperatorPair::apply_m_adj(const VectorXcd& x) const {
  if (!structured) return m.adjoint() * x;
  VectorXcd y = VectorXcd::Zero(dim_);
  for (int n = -grid.n1; n <= grid.n1; ++n)
    scatter(m_blk[size_t(n + grid.n1)].adjoint() * gather(x, n), n, y);
  return y;
}

namespace {

MatrixXcd materialize(const OperatorPair& ops, bool mass) {
  MatrixXcd d = MatrixXcd::Zero(ops.dim(), ops.dim());
  VectorXcd e = VectorXcd::Zero(ops.dim());
  for (Eigen::Index j = 0; j < ops.dim(); ++j) {
    e[j] = 1.0;
    d.col(j) = mass ? ops.apply_m(e) : ops.apply_a(e);
    e[j] = 0.0;
  }
  return d;
}

}  // namespace

MatrixXcd OperatorPair::a_dense() const { return structured ? materialize(*this, false) : a; }
MatrixXcd OperatorPair::m_dense() const { return structured ? materialize(*this, true) : m; }

// --- ShiftedFactor ----------------------------------------------------------

namespace {

// row equilibration: collocation rows span many orders of magnitude, which
// would otherwise wreck both the condition estimate and the solve accuracy
Eigen::VectorXd equilibrate_rows(MatrixXcd& m) {
  Eigen::VectorXd s(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double mx = m.row(i).cwiseAbs().maxCoeff();
    s[i] = (mx > 0) ? 1.0 / mx : 1.0;
    m.row(i) *= s[i];
  }
  return s;
}

}  // namespace

ShiftedFactor::ShiftedFactor(const OperatorPair& ops, Complex sigma,
                             const MatrixXcd& cols, const MatrixXcd& rows)
    : ops_(&ops), nb_(cols.cols()) {
  if (cols.cols() != rows.cols())
    throw SolverError("ShiftedFactor: border column/row counts differ");

  if (!ops.structured) {
    const Eigen::Index n = ops.dim();
    MatrixXcd big(n + nb_, n + nb_);
    big.topLeftCorner(n, n) = ops.a - sigma * ops.m;
    if (nb_ > 0) {
      big.topRightCorner(n, nb_) = cols;
      big.bottomLeftCorner(nb_, n) = rows.adjoint();
      big.bottomRightCorner(nb_, nb_).setZero();
    }
    dense_rs_ = equilibrate_rows(big);
    dense_ = std::make_unique<ZLU>(std::move(big));
    return;
  }

  const int nb_full = ops.grid.modes_full();
  bcol_idx_.assign(size_t(nb_full), {});
  // assign each border to the single Fourier block carrying its support
  for (Eigen::Index i = 0; i < nb_; ++i) {
    int home = 0;
    double best = -1.0, second = 0.0;
    for (int n = -ops.grid.n1; n <= ops.grid.n1; ++n) {
      const double w = ops.gather(cols.col(i), n).norm() +
                       ops.gather(rows.col(i), n).norm();
      if (w > best) {
        second = best < 0 ? 0.0 : best;
        best = w;
        home = n;
      } else {
        second = std::max(second, w);
      }
    }
    if (second > 1e-10 * std::max(best, 1.0))
      throw SolverError("ShiftedFactor: border spans several Fourier blocks");
    bcol_idx_[size_t(home + ops.grid.n1)].push_back(int(i));
  }

  blk_.resize(size_t(nb_full));
  blk_rs_.resize(size_t(nb_full));
  for (int n = -ops.grid.n1; n <= ops.grid.n1; ++n) {
    const size_t bi = size_t(n + ops.grid.n1);
    const Eigen::Index br = ops.block_rows(n);
    const auto& owned = bcol_idx_[bi];
    MatrixXcd big(br + Eigen::Index(owned.size()), br + Eigen::Index(owned.size()));
    big.topLeftCorner(br, br) =
        ops.a_blk[bi] - sigma * ops.m_blk[bi];
    for (size_t t = 0; t < owned.size(); ++t) {
      big.col(br + Eigen::Index(t)).head(br) = ops.gather(cols.col(owned[t]), n);
      big.row(br + Eigen::Index(t)).head(br) =
          ops.gather(rows.col(owned[t]), n).adjoint();
    }
    big.bottomRightCorner(Eigen::Index(owned.size()), Eigen::Index(owned.size()))
        .setZero();
    blk_rs_[bi] = equilibrate_rows(big);
    blk_[bi] = std::make_unique<ZLU>(std::move(big));
  }
}

VectorXcd ShiftedFactor::solve(const VectorXcd& rhs, const VectorXcd& con,
                               VectorXcd* mu) const {
  if (con.size() != nb_)
    throw SolverError("ShiftedFactor::solve: constraint vector size mismatch");
  if (dense_) {
    VectorXcd full(rhs.size() + nb_);
    full.head(rhs.size()) = rhs;
    full.tail(nb_) = con;
    full.array() *= dense_rs_.array();
    VectorXcd sol = dense_->solve(full);
    if (mu) *mu = sol.tail(nb_);
    return sol.head(rhs.size());
  }
  VectorXcd x = VectorXcd::Zero(rhs.size());
  if (mu) mu->resize(nb_);
  for (int n = -ops_->grid.n1; n <= ops_->grid.n1; ++n) {
    const size_t bi = size_t(n + ops_->grid.n1);
    const auto& owned = bcol_idx_[bi];
    const Eigen::Index br = ops_->block_rows(n);
    VectorXcd rb(br + Eigen::Index(owned.size()));
    rb.head(br) = ops_->gather(rhs, n);
    for (size_t t = 0; t < owned.size(); ++t) rb[br + Eigen::Index(t)] = con[owned[t]];
    rb.array() *= blk_rs_[bi].array();
    VectorXcd sb = blk_[bi]->solve(rb);
    ops_->scatter(sb.head(br), n, x);
    if (mu)
      for (size_t t = 0; t < owned.size(); ++t)
        (*mu)[owned[t]] = sb[br + Eigen::Index(t)];
  }
  return x;
}

VectorXcd ShiftedFactor::solve_adjoint(const VectorXcd& rhs) const {
  // with the equilibrated factorization B = D (A - sigma M), the adjoint
  // system solves B^H z = rhs followed by x = D z
  if (nb_ != 0) throw SolverError("solve_adjoint requires an unbordered factor");
  if (dense_) {
    VectorXcd z = dense_->solve(rhs, 'C');
    z.array() *= dense_rs_.array();
    return z;
  }
  VectorXcd x = VectorXcd::Zero(rhs.size());
  for (int n = -ops_->grid.n1; n <= ops_->grid.n1; ++n) {
    const size_t bi = size_t(n + ops_->grid.n1);
    VectorXcd z = blk_[bi]->solve(ops_->gather(rhs, n), 'C');
    z.array() *= blk_rs_[bi].array();
    ops_->scatter(z, n, x);
  }
  return x;
}

double ShiftedFactor::rcond_min() const {
  if (dense_) return dense_->rcond();
  double r = 1.0;
  for (const auto& b : blk_) r = std::min(r, b->rcond());
  return r;
}

// --- assembly helpers -------------------------------------------------------

namespace {

constexpr Complex kI{0.0, 1.0};

// Collocation values and wall-normal derivative values of every field of
// every Fourier mode of a full-space vector (aux slots ignored). Columns are
// indexed by n + n1.
struct ModeVals {
  std::vector<MatrixXcd> v;   // per field: (n2+1) x (2 n1 + 1)
  std::vector<MatrixXcd> dv;  // d/dx2
};

ModeVals mode_values(const ModeGrid& g, const ChebMatrices& cheb,
                     const VectorXcd& full) {
  const double sk = g.fourier_norm();
  ModeVals mv;
  mv.v.assign(size_t(g.nfields), MatrixXcd(g.cheb(), g.modes_full()));
  mv.dv.assign(size_t(g.nfields), MatrixXcd(g.cheb(), g.modes_full()));
  for (int n = -g.n1; n <= g.n1; ++n)
    for (int f = 0; f < g.nfields; ++f) {
      const auto c = full.segment(g.full_index(n, f, 0), g.cheb());
      mv.v[size_t(f)].col(n + g.n1) = sk * (cheb.eval * c);
      mv.dv[size_t(f)].col(n + g.n1) = sk * (cheb.d1 * c);
    }
  return mv;
}

// Linear, mode-diagonal operator block at frame speed c, with wall rows
// replaced by Dirichlet conditions for the velocities and the n = 0 pressure
// gauge row. Columns are scaled by the Fourier normalization so the block
// acts on stored coefficients.
MatrixXcd mode_operator(const ModeGrid& g, const ChebMatrices& cheb,
                        const ModelParams& p, int n, double c) {
  const int nc = g.cheb();
  const double sk = g.fourier_norm();
  const Complex ink = kI * double(n) * g.k;
  const double nk2 = double(n) * g.k * double(n) * g.k;

  const MatrixXcd E = cheb.eval.cast<Complex>();
  const MatrixXcd D1 = cheb.d1.cast<Complex>();
  const MatrixXcd lap = (cheb.d2 - nk2 * cheb.eval).cast<Complex>();

  MatrixXcd A = MatrixXcd::Zero(Eigen::Index(g.nfields) * nc,
                                Eigen::Index(g.nfields) * nc);
  auto blk = [&](int fr, int fc) {
    return A.block(Eigen::Index(fr) * nc, Eigen::Index(fc) * nc, nc, nc);
  };

  if (g.nfields == 3) {
    blk(FU1, FU1) = sk * (c * ink * E + (1.0 / p.re) * lap);
    blk(FU1, FP) = sk * (-ink * E);
    blk(FU2, FU2) = sk * (c * ink * E + (1.0 / p.re) * lap);
    blk(FU2, FP) = sk * (-D1);
    blk(FP, FU1) = sk * (ink * E);
    blk(FP, FU2) = sk * D1;
  } else {
    const double src = (1.0 - p.beta_visc) / p.wi;
    blk(FU1, FU1) = sk * (p.re * c * ink * E + p.beta_visc * lap);
    blk(FU1, FP) = sk * (-ink * E);
    blk(FU1, FT11) = sk * (ink * E);
    blk(FU1, FT12) = sk * D1;
    blk(FU2, FU2) = sk * (p.re * c * ink * E + p.beta_visc * lap);
    blk(FU2, FP) = sk * (-D1);
    blk(FU2, FT12) = sk * (ink * E);
    blk(FU2, FT22) = sk * D1;
    blk(FP, FU1) = sk * (ink * E);
    blk(FP, FU2) = sk * D1;

    // stress relaxation/advection with the diffusion dropped at the walls
    MatrixXcd diag_part = sk * (c * ink * E - (1.0 / p.wi) * E);
    MatrixXcd diff = sk * p.eps * lap;
    diff.row(0).setZero();
    diff.row(nc - 1).setZero();
    diag_part += diff;
    for (int t : {FT11, FT12, FT22}) blk(t, t) = diag_part;
    blk(FT11, FU1) = sk * src * (2.0 * ink * E);
    blk(FT12, FU1) = sk * src * D1;
    blk(FT12, FU2) = sk * src * (ink * E);
    blk(FT22, FU2) = sk * src * (2.0 * D1);
  }

  // Dirichlet rows: sum_m v_nm T_m(+-1) = 0, exact T_m values
  for (int s : {0, g.n2}) {
    for (int f : {FU1, FU2}) {
      A.row(Eigen::Index(f) * nc + s).setZero();
      for (int mm = 0; mm < nc; ++mm)
        A(Eigen::Index(f) * nc + s, Eigen::Index(f) * nc + mm) = cheb.eval(s, mm);
    }
  }
  if (n == 0) {
    // pressure gauge: the mean coefficient is pure gauge
    A.row(Eigen::Index(FP) * nc + 0).setZero();
    A(Eigen::Index(FP) * nc + 0, Eigen::Index(FP) * nc + 0) = 1.0;
    // tau closure for the mean pressure: the interior wall-normal momentum
    // rows pin p' at n2-1 points only, leaving one polynomial mode free.
    // u2 = 0 is already implied by continuity plus one Dirichlet row, so the
    // bottom-wall momentum row closes the highest pressure coefficient.
    A.row(Eigen::Index(FU2) * nc + g.n2).setZero();
    A(Eigen::Index(FU2) * nc + g.n2, Eigen::Index(FP) * nc + g.n2) = 1.0;
  }
  return A;
}

MatrixXcd mode_mass(const ModeGrid& g, const ChebMatrices& cheb,
                    const ModelParams& p, int n) {
  (void)n;
  const int nc = g.cheb();
  const double sk = g.fourier_norm();
  MatrixXcd M = MatrixXcd::Zero(Eigen::Index(g.nfields) * nc,
                                Eigen::Index(g.nfields) * nc);
  const double vel = (g.nfields == 3) ? 1.0 : p.re;
  for (int f : {FU1, FU2}) {
    for (int s = 1; s < g.n2; ++s)
      for (int mm = 0; mm < nc; ++mm)
        M(Eigen::Index(f) * nc + s, Eigen::Index(f) * nc + mm) =
            vel * sk * cheb.eval(s, mm);
  }
  if (g.nfields == 6) {
    for (int f : {FT11, FT12, FT22})
      for (int s = 0; s <= g.n2; ++s)
        for (int mm = 0; mm < nc; ++mm)
          M(Eigen::Index(f) * nc + s, Eigen::Index(f) * nc + mm) =
              sk * cheb.eval(s, mm);
  }
  return M;
}

// d(residual)/dc for mode n: the moving-frame term differentiated at the
// current state (momentum rows carry the Re factor for Oldroyd-B).
VectorXcd mode_dc(const ModeGrid& g, const ModelParams& p, int n,
                  const ModeVals& mv) {
  const int nc = g.cheb();
  const Complex ink = kI * double(n) * g.k;
  const double vel = (g.nfields == 3) ? 1.0 : p.re;
  VectorXcd out = VectorXcd::Zero(Eigen::Index(g.nfields) * nc);
  for (int s = 1; s < g.n2; ++s) {
    out[Eigen::Index(FU1) * nc + s] = vel * ink * mv.v[FU1](s, n + g.n1);
    out[Eigen::Index(FU2) * nc + s] = vel * ink * mv.v[FU2](s, n + g.n1);
  }
  if (g.nfields == 6)
    for (int t : {FT11, FT12, FT22})
      for (int s = 0; s <= g.n2; ++s)
        out[Eigen::Index(t) * nc + s] = ink * mv.v[size_t(t)](s, n + g.n1);
  return out;
}

// The quadratic terms of output mode n produced by the (q, n-q) mode pair.
void accumulate_bilinear(const ModeGrid& g, const ModelParams& p,
                         const ModeVals& x, const ModeVals& y, int n, int q,
                         VectorXcd& out) {
  const int nc = g.cheb();
  const int j = n - q;
  const Complex ijk = kI * double(j) * g.k;
  const Complex iqk = kI * double(q) * g.k;
  const int qc = q + g.n1, jc = j + g.n1;
  const double vel = (g.nfields == 3) ? 1.0 : p.re;

  const Eigen::Index base = g.full_index(n, 0, 0);
  for (int s = 1; s < g.n2; ++s) {
    const Complex xu1 = x.v[FU1](s, qc), xu2 = x.v[FU2](s, qc);
    out[base + Eigen::Index(FU1) * nc + s] +=
        vel * (xu1 * ijk * y.v[FU1](s, jc) + xu2 * y.dv[FU1](s, jc));
    out[base + Eigen::Index(FU2) * nc + s] +=
        vel * (xu1 * ijk * y.v[FU2](s, jc) + xu2 * y.dv[FU2](s, jc));
  }
  if (g.nfields == 6) {
    for (int s = 0; s <= g.n2; ++s) {
      const Complex xu1 = x.v[FU1](s, qc), xu2 = x.v[FU2](s, qc);
      const Complex g11 = iqk * xu1, g12 = x.dv[FU1](s, qc);
      const Complex g21 = iqk * xu2, g22 = x.dv[FU2](s, qc);
      const Complex t11 = y.v[FT11](s, jc), t12 = y.v[FT12](s, jc),
                    t22 = y.v[FT22](s, jc);
      // transport (u . grad) T minus the stretching G T + T G^T
      out[base + Eigen::Index(FT11) * nc + s] +=
          xu1 * ijk * t11 + xu2 * y.dv[FT11](s, jc) - 2.0 * (g11 * t11 + g12 * t12);
      out[base + Eigen::Index(FT12) * nc + s] +=
          xu1 * ijk * t12 + xu2 * y.dv[FT12](s, jc) -
          (g11 * t12 + g12 * t22 + g21 * t11 + g22 * t12);
      out[base + Eigen::Index(FT22) * nc + s] +=
          xu1 * ijk * t22 + xu2 * y.dv[FT22](s, jc) - 2.0 * (g21 * t12 + g22 * t22);
    }
  }
}

// Jacobian block d[B(v,.) + B(.,v)]/d(coeffs of mode jcol) at output mode n.
MatrixXcd bilinear_jacobian_block(const ModeGrid& g, const ChebMatrices& cheb,
                                  const ModelParams& p, const ModeVals& v,
                                  int n, int jcol) {
  const int nc = g.cheb();
  const double sk = g.fourier_norm();
  const int jv = n - jcol;  // mode of the frozen argument
  MatrixXcd J = MatrixXcd::Zero(Eigen::Index(g.nfields) * nc,
                                Eigen::Index(g.nfields) * nc);
  if (jv < -g.n1 || jv > g.n1) return J;

  const Complex ijk = kI * double(jcol) * g.k;   // d/dx1 of the varying slot
  const Complex ijvk = kI * double(jv) * g.k;    // d/dx1 of the frozen slot
  const int vc = jv + g.n1;
  const double vel = (g.nfields == 3) ? 1.0 : p.re;

  const MatrixXcd E = sk * cheb.eval.cast<Complex>();
  const MatrixXcd D1 = sk * cheb.d1.cast<Complex>();

  auto blk = [&](int fr, int fc) {
    return J.block(Eigen::Index(fr) * nc, Eigen::Index(fc) * nc, nc, nc);
  };
  auto rowmask = [&](auto&& mat, bool momentum) -> MatrixXcd {
    MatrixXcd m = mat;
    if (momentum) {
      m.row(0).setZero();
      m.row(nc - 1).setZero();
    }
    return m;
  };

  // advection: rows mom-x/mom-y
  {
    const auto vu1 = v.v[FU1].col(vc).asDiagonal();
    const auto vu2 = v.v[FU2].col(vc).asDiagonal();
    const auto vdu1 = v.dv[FU1].col(vc).asDiagonal();
    const auto vdu2 = v.dv[FU2].col(vc).asDiagonal();
    // B(v, .): varies y
    blk(FU1, FU1) += rowmask(vel * (vu1 * (ijk * E) + vu2 * D1), true);
    blk(FU2, FU2) += rowmask(vel * (vu1 * (ijk * E) + vu2 * D1), true);
    // B(., v): varies x
    blk(FU1, FU1) += rowmask(vel * ((ijvk * v.v[FU1].col(vc)).asDiagonal() * E), true);
    blk(FU1, FU2) += rowmask(vel * (vdu1 * E), true);
    blk(FU2, FU1) += rowmask(vel * ((ijvk * v.v[FU2].col(vc)).asDiagonal() * E), true);
    blk(FU2, FU2) += rowmask(vel * (vdu2 * E), true);
  }

  if (g.nfields == 6) {
    const auto vu1 = v.v[FU1].col(vc).asDiagonal();
    const auto vu2 = v.v[FU2].col(vc).asDiagonal();
    const VectorXcd g11 = ijvk * v.v[FU1].col(vc);
    const VectorXcd g12 = v.dv[FU1].col(vc);
    const VectorXcd g21 = ijvk * v.v[FU2].col(vc);
    const VectorXcd g22 = v.dv[FU2].col(vc);

    // stress transport, y varies
    for (int t : {FT11, FT12, FT22})
      blk(t, t) += vu1 * (ijk * E) + vu2 * D1;
    // stretching, y varies (G from frozen v)
    blk(FT11, FT11) += -2.0 * (g11.asDiagonal() * E);
    blk(FT11, FT12) += -2.0 * (g12.asDiagonal() * E);
    blk(FT12, FT12) += -(g11.asDiagonal() * E) - (g22.asDiagonal() * E);
    blk(FT12, FT22) += -(g12.asDiagonal() * E);
    blk(FT12, FT11) += -(g21.asDiagonal() * E);
    blk(FT22, FT12) += -2.0 * (g21.asDiagonal() * E);
    blk(FT22, FT22) += -2.0 * (g22.asDiagonal() * E);

    // transport, x velocity varies (frozen stress of v)
    for (int t : {FT11, FT12, FT22}) {
      blk(t, FU1) += (ijvk * v.v[size_t(t)].col(vc)).asDiagonal() * E;
      blk(t, FU2) += v.dv[size_t(t)].col(vc).asDiagonal() * E;
    }
    // stretching, x velocity varies (frozen stress of v); G11 = i q k xu1 with
    // q = jcol here, G12 = xu1', G21 = i q k xu2, G22 = xu2'
    const auto t11 = v.v[FT11].col(vc).asDiagonal();
    const auto t12 = v.v[FT12].col(vc).asDiagonal();
    const auto t22 = v.v[FT22].col(vc).asDiagonal();
    blk(FT11, FU1) += -2.0 * (t11 * (ijk * E) + t12 * D1);
    blk(FT12, FU1) += -(t12 * (ijk * E) + t22 * D1);
    blk(FT12, FU2) += -(t11 * (ijk * E) + t12 * D1);
    blk(FT22, FU2) += -2.0 * (t12 * (ijk * E) + t22 * D1);
  }
  return J;
}

VectorXd integral_row_u1(const ModeGrid& g, const ChebMatrices& cheb) {
  // flux functional coefficients on the n = 0, u1 Chebyshev modes
  return 0.5 * g.fourier_norm() * cheb.moments;
}

}  // namespace

// --- bilinear ---------------------------------------------------------------

VectorXcd apply_bilinear(const ModeGrid& grid, const ChebMatrices& cheb,
                         const ModelParams& params, const VectorXcd& x_full,
                         const VectorXcd& y_full) {
  if (x_full.size() != grid.full_size() || y_full.size() != grid.full_size())
    throw ConfigError("apply_bilinear: vector size does not match grid");
  const ModeVals xv = mode_values(grid, cheb, x_full);
  const ModeVals yv = mode_values(grid, cheb, y_full);
  VectorXcd out = VectorXcd::Zero(grid.full_size());
  for (int n = -grid.n1; n <= grid.n1; ++n) {
    const int qlo = std::max(-grid.n1, n - grid.n1);
    const int qhi = std::min(grid.n1, n + grid.n1);
    for (int q = qlo; q <= qhi; ++q)
      accumulate_bilinear(grid, params, xv, yv, n, q, out);
  }
  return out;
}

VectorXcd apply_bilinear(const ModeGrid& grid, const ChebMatrices& cheb,
                         const ModelParams& params, const StateVector& x,
                         const StateVector& y) {
  return apply_bilinear(grid, cheb, params, embed_full(grid, x),
                        embed_full(grid, y));
}

// --- steady assembly ---------------------------------------------------------

SteadySystem assemble_steady(const ModeGrid& grid, const ChebMatrices& cheb,
                             const ModelParams& params, const VectorXcd& v_full,
                             const AssemblyOptions& opt) {
  const Eigen::Index N = grid.full_size();
  if (v_full.size() != N) throw ConfigError("assemble_steady: size mismatch");
  const int nc = grid.cheb();
  const double sk = grid.fourier_norm();
  const double c = v_full[grid.c_slot()].real();
  const Complex f = v_full[grid.f_slot()];

  SteadySystem sys;
  sys.residual = VectorXcd::Zero(N);
  sys.jacobian = MatrixXcd::Zero(N, N);
  const ModeVals mv = mode_values(grid, cheb, v_full);

  for (int n = -grid.n1; n <= grid.n1; ++n) {
    const MatrixXcd An = mode_operator(grid, cheb, params, n, c);
    const Eigen::Index r0 = grid.block_start(n);
    sys.jacobian.block(r0, r0, grid.block_len(), grid.block_len()) = An;
    sys.residual.segment(r0, grid.block_len()) =
        An * v_full.segment(r0, grid.block_len());
    // forcing enters the n = 0 streamwise momentum rows
    if (n == 0) {
      for (int s = 1; s < grid.n2; ++s) {
        sys.residual[r0 + Eigen::Index(FU1) * nc + s] += f;
        sys.jacobian(r0 + Eigen::Index(FU1) * nc + s, grid.f_slot()) = 1.0;
      }
    }
    sys.jacobian.block(r0, grid.c_slot(), grid.block_len(), 1) =
        mode_dc(grid, params, n, mv);
    // bilinear Jacobian coupling
    for (int j = std::max(-grid.n1, n - grid.n1);
         j <= std::min(grid.n1, n + grid.n1); ++j) {
      const MatrixXcd Bj =
          bilinear_jacobian_block(grid, cheb, params, mv, n, j);
      sys.jacobian.block(r0, grid.block_start(j), grid.block_len(),
                         grid.block_len()) -= Bj;
    }
  }
  sys.residual -= apply_bilinear(grid, cheb, params, v_full, v_full);

  // volume-flux row
  {
    const Eigen::Index row = grid.f_slot();
    const VectorXd w = integral_row_u1(grid, cheb);
    Complex val = 0.0;
    for (int mm = 0; mm < nc; ++mm) {
      sys.jacobian(row, grid.full_index(0, FU1, mm)) = w[mm];
      val += w[mm] * v_full[grid.full_index(0, FU1, mm)];
    }
    sys.residual[row] = val - 1.0;
  }

  // phase row, or the trivial c equation for x1-independent problems
  {
    const Eigen::Index row = grid.c_slot();
    if (opt.phase_row && grid.n1 >= 1) {
      const Complex cpos = kI * (M_PI / grid.k) * sk;
      Complex val = 0.0;
      for (int mm = 0; mm < nc; ++mm) {
        const Complex w = cpos * cheb.moments[mm];
        sys.jacobian(row, grid.full_index(1, FU1, mm)) = w;
        sys.jacobian(row, grid.full_index(-1, FU1, mm)) = -w;
        val += w * v_full[grid.full_index(1, FU1, mm)] -
               w * v_full[grid.full_index(-1, FU1, mm)];
      }
      sys.residual[row] = val;
    } else {
      sys.jacobian(row, grid.c_slot()) = 1.0;
      sys.residual[row] = v_full[grid.c_slot()];
    }
  }
  return sys;
}

VectorXcd steady_residual(const ModeGrid& grid, const ChebMatrices& cheb,
                          const ModelParams& params, const VectorXcd& v_full,
                          const AssemblyOptions& opt) {
  // assembles the Jacobian too; fine at desk scale, and keeps one code path
  return assemble_steady(grid, cheb, params, v_full, opt).residual;
}

// --- laminar state ------------------------------------------------------------

namespace {

ModeGrid profile_grid(const ModeGrid& grid) {
  ModeGrid g = grid;
  g.n1 = 0;  // internal 1D restriction; not user-visible
  return g;
}

VectorXcd values_to_coeffs(const ChebMatrices& cheb, const VectorXd& vals) {
  const VectorXd c = cheb.eval.partialPivLu().solve(vals);
  return c.cast<Complex>();
}

}  // namespace

StateVector laminar_state(const ModeGrid& grid, const ChebMatrices& cheb,
                          const ModelParams& params) {
  params.validate(grid.nfields);
  const ModeGrid g0 = profile_grid(grid);
  const double sk = grid.fourier_norm();
  const int nc = grid.cheb();

  // parabolic seed 1.5 (1 - x2^2) = 0.75 T0 - 0.75 T2
  VectorXcd seed = VectorXcd::Zero(g0.full_size());
  seed[g0.full_index(0, FU1, 0)] = 0.75 / sk;
  seed[g0.full_index(0, FU1, 2)] = -0.75 / sk;
  if (grid.nfields == 3) {
    seed[g0.f_slot()] = 3.0 / params.re;
  } else {
    seed[g0.f_slot()] = 3.0;
    const VectorXd shear = -3.0 * cheb.points;  // U' of the parabola
    const VectorXd t12v = (1.0 - params.beta_visc) * shear;
    const VectorXd t11v =
        2.0 * params.wi * (1.0 - params.beta_visc) * shear.cwiseProduct(shear);
    seed.segment(g0.full_index(0, FT12, 0), nc) = values_to_coeffs(cheb, t12v);
    seed.segment(g0.full_index(0, FT11, 0), nc) = values_to_coeffs(cheb, t11v);
  }

  const AssemblyOptions opt{/*phase_row=*/false};
  NewtonProblem prob;
  prob.eval = [&](const VectorXcd& x, VectorXcd& res, MatrixXcd* jac) {
    auto sys = assemble_steady(g0, cheb, params, x, opt);
    res = std::move(sys.residual);
    if (jac) *jac = std::move(sys.jacobian);
  };
  prob.project = [&](VectorXcd& x) { symmetrize_full(g0, x); };

  NewtonOptions nopt;
  nopt.tol = 1e-12;
  nopt.max_iter = 40;
  NewtonResult r = newton_solve(prob, seed, nopt);
  if (!r.converged)
    throw SolverError("laminar profile Newton failed to converge; final residual " +
                      std::to_string(r.residual_norm));

  StateVector prof = extract_half(g0, r.x);
  StateVector out(grid);
  out.coeffs.segment(grid.half_index(0, 0, 0), grid.block_len()) =
      prof.coeffs;
  out.f = prof.f;
  out.c = 0.0;
  return out;
}

// --- linearization -------------------------------------------------------------

namespace {

bool streamwise_independent(const ModeGrid& grid, const StateVector& base) {
  double scale = base.coeffs.cwiseAbs().maxCoeff();
  if (scale == 0.0) return true;
  double off = 0.0;
  for (int n = 1; n <= grid.n1; ++n)
    off = std::max(off, base.coeffs
                            .segment(grid.half_index(n, 0, 0), grid.block_len())
                            .cwiseAbs()
                            .maxCoeff());
  return off < 1e-12 * scale;
}

}  // namespace

OperatorPair assemble_linearization(const ModeGrid& grid,
                                    const ChebMatrices& cheb,
                                    const ModelParams& params,
                                    const StateVector& base) {
  check_layout(grid, base);
  const VectorXcd base_full = embed_full(grid, base);
  OperatorPair ops;
  ops.grid = grid;
  ops.dim_ = grid.full_size();

  if (streamwise_independent(grid, base)) {
    ops.structured = true;
    const ModeVals mv = mode_values(grid, cheb, base_full);
    const int nc = grid.cheb();
    ops.a_blk.resize(size_t(grid.modes_full()));
    ops.m_blk.resize(size_t(grid.modes_full()));
    for (int n = -grid.n1; n <= grid.n1; ++n) {
      MatrixXcd An = mode_operator(grid, cheb, params, n, base.c) -
                     bilinear_jacobian_block(grid, cheb, params, mv, n, n);
      MatrixXcd Mn = mode_mass(grid, cheb, params, n);
      if (n == 0) {
        const Eigen::Index bl = grid.block_len();
        MatrixXcd A0 = MatrixXcd::Zero(bl + 2, bl + 2);
        MatrixXcd M0 = MatrixXcd::Zero(bl + 2, bl + 2);
        A0.topLeftCorner(bl, bl) = An;
        M0.topLeftCorner(bl, bl) = Mn;
        for (int s = 1; s < grid.n2; ++s)
          A0(Eigen::Index(FU1) * nc + s, bl) = 1.0;  // d/df
        const VectorXd w = integral_row_u1(grid, cheb);
        for (int mm = 0; mm < nc; ++mm)
          A0(bl, Eigen::Index(FU1) * nc + mm) = w[mm];  // flux row
        A0(bl + 1, bl + 1) = 1.0;                       // trivial c equation
        ops.a_blk[size_t(n + grid.n1)] = std::move(A0);
        ops.m_blk[size_t(n + grid.n1)] = std::move(M0);
      } else {
        ops.a_blk[size_t(n + grid.n1)] = std::move(An);
        ops.m_blk[size_t(n + grid.n1)] = std::move(Mn);
      }
    }
    return ops;
  }

  ops.structured = false;
  ops.a = assemble_steady(grid, cheb, params, base_full, {/*phase_row=*/true})
              .jacobian;
  ops.m = MatrixXcd::Zero(grid.full_size(), grid.full_size());
  for (int n = -grid.n1; n <= grid.n1; ++n) {
    const Eigen::Index r0 = grid.block_start(n);
    ops.m.block(r0, r0, grid.block_len(), grid.block_len()) =
        mode_mass(grid, cheb, params, n);
  }
  return ops;
}

// --- observables -----------------------------------------------------------------

namespace {

struct QuadTables {
  VectorXd xq;      // oversampled Gauss-Lobatto points
  VectorXd wq;      // quadrature weights there
  MatrixXd Eq, Dq;  // T_m and T'_m at xq, m = 0..n2
};

QuadTables quad_tables(const ModeGrid& grid, int factor = 4) {
  const int nq = std::max(2 * grid.n2 + 2, factor * grid.n2);
  QuadTables q;
  ChebMatrices cq = cheb_matrices(nq);
  q.xq = cq.points;
  q.wq = cq.weights;
  q.Eq = cheb_eval_at(grid.n2, q.xq);
  q.Dq = cheb_deriv_at(grid.n2, q.xq);
  return q;
}

}  // namespace

double energy_of_full(const ModeGrid& grid, const ChebMatrices& cheb,
                      const VectorXcd& full) {
  (void)cheb;
  // Fourier modes are L2-orthonormal, so the streamwise integral collapses
  // and the energy is a plain sum over mode profiles.
  const QuadTables q = quad_tables(grid, 2);
  double acc = 0.0;
  for (int n = -grid.n1; n <= grid.n1; ++n)
    for (int f : {FU1, FU2}) {
      const VectorXcd vals =
          q.Eq * full.segment(grid.full_index(n, f, 0), grid.cheb());
      acc += q.wq.dot(vals.cwiseAbs2());
    }
  return 0.5 * acc;
}

double defect_norm(const ModeGrid& grid, const ChebMatrices& cheb,
                   const VectorXcd& resid_full) {
  // residual rows hold plain-Fourier coefficients of the defect field at the
  // collocation points; the period factor makes this the physical L2 norm
  double acc = 0.0;
  for (int n = -grid.n1; n <= grid.n1; ++n)
    for (int f = 0; f < grid.nfields; ++f) {
      const auto vals = resid_full.segment(grid.full_index(n, f, 0), grid.cheb());
      acc += cheb.weights.dot(vals.cwiseAbs2());
    }
  acc *= 2.0 * M_PI / grid.k;
  acc += std::norm(resid_full[grid.f_slot()]) + std::norm(resid_full[grid.c_slot()]);
  return std::sqrt(acc);
}

ObsRecord observables(const ModeGrid& grid, const ChebMatrices& cheb,
                      const ModelParams& params, const StateVector& u,
                      const StateVector* base) {
  check_layout(grid, u);
  const QuadTables q = quad_tables(grid, 4);
  const double sk = grid.fourier_norm();
  const int nc = grid.cheb();

  ObsRecord obs;
  double e = 0.0, d2 = 0.0;
  for (int n = 0; n <= grid.n1; ++n) {
    const double mult = (n == 0) ? 1.0 : 2.0;
    const double nk2 = double(n) * grid.k * double(n) * grid.k;
    for (int f : {FU1, FU2}) {
      const VectorXcd vals =
          q.Eq * u.coeffs.segment(grid.half_index(n, f, 0), nc);
      const VectorXcd dvals =
          q.Dq * u.coeffs.segment(grid.half_index(n, f, 0), nc);
      e += mult * q.wq.dot(vals.cwiseAbs2());
      d2 += mult * (q.wq.dot(dvals.cwiseAbs2()) + nk2 * q.wq.dot(vals.cwiseAbs2()));
    }
  }
  obs.e = 0.5 * e;
  obs.d = std::sqrt(d2);

  Complex mwnv = 0.0, svf = 0.0;
  const VectorXd txhat =
      cheb_eval_at(grid.n2, (VectorXd(1) << params.xhat2).finished())
          .row(0)
          .transpose();
  for (int n = 0; n <= grid.n1; ++n) {
    const double mult = (n == 0) ? 1.0 : 2.0;
    Complex m_n = 0.0, s_n = 0.0;
    for (int mm = 0; mm < nc; ++mm) {
      m_n += u.at(grid, n, FU2, mm) * cheb.moments[mm];
      s_n += u.at(grid, n, FU1, mm) * txhat[mm];
    }
    mwnv += (n == 0) ? m_n : mult * Complex(m_n.real(), 0.0);
    svf += (n == 0) ? s_n : mult * Complex(s_n.real(), 0.0);
  }
  obs.mwnv = sk * mwnv.real();
  obs.svf = sk * svf.real();

  if (grid.nfields == 6 && base != nullptr) {
    auto trace_int = [&](const StateVector& s) {
      Complex acc = 0.0;
      for (int mm = 0; mm < nc; ++mm)
        acc += (s.at(grid, 0, FT11, mm) + s.at(grid, 0, FT22, mm)) *
               cheb.moments[mm];
      return acc.real();
    };
    const double tb = trace_int(*base);
    if (tb != 0.0) obs.t_ratio = 1.0 + trace_int(u) / tb;
  }
  return obs;
}

SpectrumBoundConstants spectrum_bound_constants(const ModeGrid& grid,
                                                const ChebMatrices& cheb,
                                                const StateVector& base) {
  check_layout(grid, base);
  (void)cheb;
  const QuadTables q = quad_tables(grid, 4);
  const double sk = grid.fourier_norm();
  const int nc = grid.cheb();
  const int nx = std::max(8, 4 * grid.modes_full());
  const double period = 2.0 * M_PI / grid.k;

  // profiles and wall-normal derivatives at the oversampled x2 points
  MatrixXcd u1(q.xq.size(), grid.modes_half()), u2 = u1, du1 = u1, du2 = u1;
  for (int n = 0; n <= grid.n1; ++n) {
    u1.col(n) = sk * (q.Eq * base.coeffs.segment(grid.half_index(n, FU1, 0), nc));
    u2.col(n) = sk * (q.Eq * base.coeffs.segment(grid.half_index(n, FU2, 0), nc));
    du1.col(n) = sk * (q.Dq * base.coeffs.segment(grid.half_index(n, FU1, 0), nc));
    du2.col(n) = sk * (q.Dq * base.coeffs.segment(grid.half_index(n, FU2, 0), nc));
  }

  SpectrumBoundConstants sb;
  for (int i = 0; i < nx; ++i) {
    const double x1 = period * double(i) / double(nx);
    for (Eigen::Index s = 0; s < q.xq.size(); ++s) {
      auto field = [&](const MatrixXcd& prof) {
        Complex acc = prof(s, 0);
        for (int n = 1; n <= grid.n1; ++n)
          acc += 2.0 * (prof(s, n) * std::polar(1.0, double(n) * grid.k * x1)).real();
        return acc.real();
      };
      auto dx1_field = [&](const MatrixXcd& prof) {
        Complex acc = 0.0;
        for (int n = 1; n <= grid.n1; ++n)
          acc += 2.0 * (kI * double(n) * grid.k * prof(s, n) *
                        std::polar(1.0, double(n) * grid.k * x1))
                           .real();
        return acc.real();
      };
      const double v1 = field(u1), v2 = field(u2);
      const double d11 = dx1_field(u1), d12 = field(du1);
      const double d21 = dx1_field(u2), d22 = field(du2);
      sb.a = std::max(sb.a, std::sqrt(v1 * v1 + v2 * v2));
      sb.b = std::max(sb.b, std::abs(d21 - d12));
      sb.c_const = std::max(
          sb.c_const, std::sqrt(d11 * d11 + d12 * d12 + d21 * d21 + d22 * d22));
    }
  }
  return sb;
}

bool spectrum_envelope_holds(const SpectrumBoundConstants& sb, double re,
                             Complex lambda, double slack) {
  const double arg = std::max(-lambda.real() + sb.c_const, 0.0) * re;
  const double bound = sb.a * std::sqrt(arg) + sb.b;
  return std::abs(lambda.imag()) <= (1.0 + slack) * bound + 1e-9;
}

}  // namespace ssmflow
