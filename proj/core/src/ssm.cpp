#include "ssmflow/ssm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ssmflow/errors.hpp"

namespace ssmflow {

int multi_order(const MultiIndex& a) {
  return std::accumulate(a.begin(), a.end(), 0);
}

namespace {

void enumerate_rec(int r, int j, MultiIndex& cur, std::vector<MultiIndex>& out) {
  if (int(cur.size()) == r - 1) {
    cur.push_back(j);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int v = j; v >= 0; --v) {
    cur.push_back(v);
    enumerate_rec(r, j - v, cur, out);
    cur.pop_back();
  }
}

std::string alpha_str(const MultiIndex& a) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < a.size(); ++i) os << (i ? "," : "") << a[i];
  os << ")";
  return os.str();
}

Complex sigma_of(const MultiIndex& a, const SpectralSplit& split) {
  Complex s = 0.0;
  for (size_t q = 0; q < a.size(); ++q)
    s += double(a[q]) * split.sigma1[q].lambda;
  return s;
}

}  // namespace

std::vector<MultiIndex> enumerate_multiindices(int r, int j) {
  if (r < 1 || j < 1)
    throw ConfigError("enumerate_multiindices requires r >= 1, j >= 1");
  std::vector<MultiIndex> out;
  MultiIndex cur;
  enumerate_rec(r, j, cur, out);
  return out;
}

std::string to_string(ResonanceType t) {
  switch (t) {
    case ResonanceType::none: return "none";
    case ResonanceType::internal: return "internal";
    case ResonanceType::cross: return "cross";
    case ResonanceType::near_cross: return "near-cross";
  }
  return "?";
}

ResonanceHit classify_resonance(const MultiIndex& alpha,
                                const SpectralSplit& split, double res_tol,
                                double cross_tol) {
  if (int(alpha.size()) != split.r())
    throw ConfigError("classify_resonance: alpha dimension mismatch");
  ResonanceHit hit;
  hit.alpha = alpha;
  const Complex s = sigma_of(alpha, split);

  double best_int = 1e300;
  for (int q = 0; q < split.r(); ++q) {
    const Complex lam = split.sigma1[size_t(q)].lambda;
    const double d = std::abs(s - lam) / std::max(std::abs(lam), 1e-300);
    if (d < res_tol) hit.matched_q.push_back(q);
    if (d < best_int) {
      best_int = d;
      if (d < res_tol) {
        hit.matched = lam;
        hit.rel_dist = d;
      }
    }
  }
  if (!hit.matched_q.empty()) {
    hit.type = ResonanceType::internal;
    return hit;
  }

  double best_cross = 1e300;
  Complex best_lam = 0.0;
  for (const Complex& lam : split.sigma2_values) {
    const double d = std::abs(s - lam) / std::max(std::abs(lam), 1.0);
    if (d < best_cross) {
      best_cross = d;
      best_lam = lam;
    }
  }
  if (best_cross < cross_tol) {
    hit.type = ResonanceType::cross;
    hit.matched = best_lam;
    hit.rel_dist = best_cross;
  } else if (best_cross < res_tol) {
    hit.type = ResonanceType::near_cross;
    hit.matched = best_lam;
    hit.rel_dist = best_cross;
  }
  return hit;
}

const Monomial* ExpansionTable::find(const MultiIndex& a) const {
  auto it = monomials.find(a);
  return it == monomials.end() ? nullptr : &it->second;
}

std::vector<const std::pair<const MultiIndex, Monomial>*>
ExpansionTable::at_order(int j) const {
  std::vector<const std::pair<const MultiIndex, Monomial>*> out;
  for (const auto& kv : monomials)
    if (multi_order(kv.first) == j) out.push_back(&kv);
  return out;
}

std::map<MultiIndex, VectorXcd> compute_eta(const ExpansionTable& table, int j,
                                            const OperatorPair& ops,
                                            const BilinearFn& bilinear) {
  if (j < 2) throw ConfigError("compute_eta: order must be >= 2");
  for (int jj = 1; jj < std::min(j, table.order + 1); ++jj)
    if (table.at_order(jj).empty())
      throw ConfigError("compute_eta: table is missing order " +
                        std::to_string(jj));

  std::map<MultiIndex, VectorXcd> eta;
  auto add = [&](const MultiIndex& a, const VectorXcd& v) {
    auto it = eta.find(a);
    if (it == eta.end())
      eta.emplace(a, v);
    else
      it->second += v;
  };

  // bilinear convolution of the stored orders
  for (int j1 = std::max(1, j - table.order); j1 <= std::min(j - 1, table.order);
       ++j1) {
    const int j2 = j - j1;
    for (const auto* p1 : table.at_order(j1))
      for (const auto* p2 : table.at_order(j2)) {
        MultiIndex a(p1->first);
        for (size_t q = 0; q < a.size(); ++q) a[q] += p2->first[q];
        add(a, bilinear(p1->second.K, p2->second.K));
      }
  }

  // chain rule term M sum_{k=2}^{j-1} D K_{j-k+1}[R_k]
  std::map<MultiIndex, VectorXcd> chain;
  auto addc = [&](const MultiIndex& a, const VectorXcd& v) {
    auto it = chain.find(a);
    if (it == chain.end())
      chain.emplace(a, v);
    else
      it->second += v;
  };
  for (int k = 2; k <= std::min(j - 1, table.order); ++k) {
    const int jp = j - k + 1;
    if (jp < 1 || jp > table.order) continue;
    for (const auto* pk : table.at_order(jp)) {
      const MultiIndex& a = pk->first;
      for (size_t q = 0; q < a.size(); ++q) {
        if (a[q] == 0) continue;
        for (const auto* pr : table.at_order(k)) {
          const Complex rq = pr->second.R[Eigen::Index(q)];
          if (rq == 0.0) continue;
          MultiIndex g(a);
          g[q] -= 1;
          for (size_t t = 0; t < g.size(); ++t) g[t] += pr->first[t];
          addc(g, (double(a[q]) * rq) * pk->second.K);
        }
      }
    }
  }
  for (auto& [a, v] : chain) add(a, ops.apply_m(v));

  // make sure every |alpha| = j entry exists
  for (const auto& a : enumerate_multiindices(table.r, j))
    if (!eta.count(a)) eta.emplace(a, VectorXcd::Zero(ops.dim()));
  return eta;
}

namespace {

// grading that makes the Jordan (superdiagonal) coupling strictly triangular
long nilpotent_weight(const MultiIndex& a) {
  long w = 0;
  for (size_t q = 0; q < a.size(); ++q) w += long(q) * a[q];
  return w;
}

bool r1_is_diagonal(const MatrixXcd& r1) {
  for (Eigen::Index i = 0; i < r1.rows(); ++i)
    for (Eigen::Index j = 0; j < r1.cols(); ++j)
      if (i != j && r1(i, j) != 0.0) return false;
  return true;
}

}  // namespace

void solve_order(int j, const std::map<MultiIndex, VectorXcd>& eta,
                 const SpectralSplit& split, const OperatorPair& ops,
                 const SsmConfig& config, ExpansionTable& table) {
  const int r = split.r();
  const bool diag = r1_is_diagonal(split.r1);
  if (!diag) {
    // require Jordan (upper-triangular) structure
    for (Eigen::Index i = 0; i < split.r1.rows(); ++i)
      for (Eigen::Index jj = 0; jj < i; ++jj)
        if (split.r1(i, jj) != 0.0)
          throw ConfigError("solve_order: R_1 must be diagonal or in Jordan form");
  }

  std::vector<MultiIndex> order_list = enumerate_multiindices(r, j);
  if (!diag)
    std::stable_sort(order_list.begin(), order_list.end(),
                     [](const MultiIndex& a, const MultiIndex& b) {
                       return nilpotent_weight(a) < nilpotent_weight(b);
                     });

  for (const MultiIndex& alpha : order_list) {
    const Complex sigma = sigma_of(alpha, split);
    ResonanceHit hit =
        classify_resonance(alpha, split, config.res_tol, config.cross_tol);
    if (hit.type == ResonanceType::cross)
      throw ResonanceError(
          "cross resonance at alpha = " + alpha_str(alpha) + ": <alpha,lambda> = " +
          std::to_string(sigma.real()) + " + " + std::to_string(sigma.imag()) +
          "i matches the Sigma2 eigenvalue " + std::to_string(hit.matched.real()) +
          " + " + std::to_string(hit.matched.imag()) +
          "i; the coefficient equation is not solvable");
    if (hit.type != ResonanceType::none) table.resonance_log.push_back(hit);

    // style decision per monomial
    std::vector<int> active;  // bordered Sigma1 components
    MonomialStyle mstyle = MonomialStyle::normal_form;
    if (config.style == ParamStyle::graph) {
      active.resize(size_t(r));
      std::iota(active.begin(), active.end(), 0);
      mstyle = MonomialStyle::graph;
    } else if (config.style == ParamStyle::normal_form) {
      if (hit.type == ResonanceType::internal) active = hit.matched_q;
    } else {  // mixed
      if (hit.type == ResonanceType::internal) {
        active.resize(size_t(r));
        std::iota(active.begin(), active.end(), 0);
        mstyle = MonomialStyle::graph;
      }
    }

    VectorXcd rhs = eta.at(alpha);
    // Jordan coupling of already-solved same-order coefficients
    if (!diag) {
      VectorXcd extra = VectorXcd::Zero(ops.dim());
      bool any = false;
      for (int q = 0; q < r; ++q)
        for (int qp = 0; qp < r; ++qp) {
          if (q == qp || split.r1(q, qp) == 0.0) continue;
          MultiIndex ap(alpha);
          ap[size_t(q)] += 1;
          ap[size_t(qp)] -= 1;
          if (ap[size_t(qp)] < 0) continue;
          const Monomial* mono = table.find(ap);
          if (!mono) continue;  // not yet solved: triangularity guarantees absence
          extra += (double(alpha[size_t(q)] + 1) * split.r1(q, qp)) * mono->K;
          any = true;
        }
      if (any) rhs += ops.apply_m(extra);
    }

    Monomial mono;
    mono.R = VectorXcd::Zero(r);
    mono.style = mstyle;

    if (active.empty()) {
      ShiftedFactor fac(ops, sigma);
      if (fac.rcond_min() < config.rcond_min)
        throw ResonanceError(
            "ill-conditioned coefficient solve at alpha = " + alpha_str(alpha) +
            " (rcond < 1e-12); increase res_tol to flag this near resonance");
      mono.K = fac.solve(rhs, VectorXcd());
    } else {
      MatrixXcd cols(ops.dim(), Eigen::Index(active.size()));
      MatrixXcd rows(ops.dim(), Eigen::Index(active.size()));
      for (size_t t = 0; t < active.size(); ++t) {
        cols.col(Eigen::Index(t)) =
            -ops.apply_m(split.sigma1[size_t(active[t])].right);
        rows.col(Eigen::Index(t)) =
            ops.apply_m_adj(split.sigma1[size_t(active[t])].left);
      }
      ShiftedFactor fac(ops, sigma, cols, rows);
      if (fac.rcond_min() < config.rcond_min)
        throw ResonanceError(
            "ill-conditioned bordered solve at alpha = " + alpha_str(alpha) +
            "; increase res_tol");
      VectorXcd mu;
      mono.K = fac.solve(rhs, VectorXcd::Zero(Eigen::Index(active.size())), &mu);
      for (size_t t = 0; t < active.size(); ++t)
        mono.R[active[t]] = mu[Eigen::Index(t)];
    }

    // residual of the order-j invariance relation for this index
    VectorXcd mk1r = VectorXcd::Zero(ops.dim());
    for (int q = 0; q < r; ++q)
      if (mono.R[q] != 0.0)
        mk1r += mono.R[q] * ops.apply_m(split.sigma1[size_t(q)].right);
    const VectorXcd check =
        ops.apply_a(mono.K) - sigma * ops.apply_m(mono.K) - mk1r - rhs;
    const double rel = check.norm() / std::max(rhs.norm(), 1e-30);
    if (rhs.norm() > 0 && rel > config.solve_residual_tol)
      throw SolverError("order-" + std::to_string(j) +
                        " invariance residual " + std::to_string(rel) +
                        " at alpha = " + alpha_str(alpha));

    table.monomials[alpha] = std::move(mono);
  }
  table.order = std::max(table.order, j);
}

ExpansionTable compute_expansion(const SpectralSplit& split,
                                 const OperatorPair& ops,
                                 const BilinearFn& bilinear,
                                 const SsmConfig& config) {
  if (config.order < 1) throw ConfigError("ssm order must be >= 1");
  ExpansionTable table;
  table.r = split.r();
  table.order = 1;
  for (int q = 0; q < split.r(); ++q) {
    MultiIndex e(size_t(split.r()), 0);
    e[size_t(q)] = 1;
    Monomial m;
    m.K = split.sigma1[size_t(q)].right;
    m.R = split.r1.col(q);
    table.monomials.emplace(std::move(e), std::move(m));
  }
  for (int j = 2; j <= config.order; ++j) {
    auto eta = compute_eta(table, j, ops, bilinear);
    solve_order(j, eta, split, ops, config, table);
  }
  return table;
}

VectorXcd evaluate_K(const ExpansionTable& table, const VectorXcd& theta) {
  if (theta.size() != table.r)
    throw ConfigError("evaluate_K: theta dimension mismatch");
  VectorXcd out;
  bool init = false;
  for (const auto& [a, mono] : table.monomials) {
    Complex t = 1.0;
    for (size_t q = 0; q < a.size(); ++q)
      for (int p = 0; p < a[q]; ++p) t *= theta[Eigen::Index(q)];
    if (!init) {
      out = t * mono.K;
      init = true;
    } else {
      out += t * mono.K;
    }
  }
  return out;
}

namespace {

std::shared_ptr<const DefectModel> defect_model(const ExpansionTable& table,
                                                const OperatorPair& ops,
                                                const BilinearFn& bilinear) {
  if (table.defect_cache) return table.defect_cache;
  auto model = std::make_shared<DefectModel>();
  model->j_lo = table.order + 1;
  model->j_hi = 2 * table.order;
  for (int j = model->j_lo; j <= model->j_hi; ++j) {
    auto eta = compute_eta(table, j, ops, bilinear);
    for (auto& [a, v] : eta)
      if (v.norm() > 0) model->eta.emplace(a, std::move(v));
  }
  table.defect_cache = model;
  return table.defect_cache;
}

}  // namespace

double error_norm(const ExpansionTable& table, const VectorXcd& theta,
                  const OperatorPair& ops, const BilinearFn& bilinear,
                  const DefectNormFn& norm) {
  auto model = defect_model(table, ops, bilinear);
  VectorXcd acc = VectorXcd::Zero(ops.dim());
  for (const auto& [a, v] : model->eta) {
    Complex t = 1.0;
    for (size_t q = 0; q < a.size(); ++q)
      for (int p = 0; p < a[q]; ++p) t *= theta[Eigen::Index(q)];
    acc += t * v;
  }
  return norm ? norm(acc) : acc.norm();
}

double fundamental_radius(const ExpansionTable& table, const OperatorPair& ops,
                          const BilinearFn& bilinear, double err_tol,
                          int nangles, const DefectNormFn& norm) {
  if (table.r > 2)
    throw ConfigError("fundamental_radius supports r <= 2");
  auto err_at = [&](double rad, double phi) {
    VectorXcd th(table.r);
    if (table.r == 1) {
      th[0] = rad * std::cos(phi);  // phi in {0, pi}: both ray directions
    } else {
      th[0] = std::polar(rad, phi);
      th[1] = std::conj(th[0]);
    }
    return error_norm(table, th, ops, bilinear, norm);
  };

  double worst = 1e300;
  const int na = (table.r == 1) ? 2 : std::max(nangles, 1);
  for (int ia = 0; ia < na; ++ia) {
    const double phi =
        (table.r == 1) ? (ia == 0 ? 0.0 : M_PI) : 2.0 * M_PI * ia / na;
    // bracket by doubling, then bisect
    double lo = 0.0, hi = 1e-6;
    int guard = 0;
    while (err_at(hi, phi) < err_tol && guard++ < 200) {
      lo = hi;
      hi *= 2.0;
    }
    if (guard >= 200) {
      worst = std::min(worst, hi);
      continue;
    }
    for (int it = 0; it < 64; ++it) {
      const double mid = 0.5 * (lo + hi);
      (err_at(mid, phi) < err_tol ? lo : hi) = mid;
    }
    worst = std::min(worst, lo);
  }
  return worst;
}

SpectralSplit rescale_eigenvectors(const SpectralSplit& split, double s) {
  if (!(s > 0)) throw ConfigError("rescale_eigenvectors: s must be > 0");
  SpectralSplit out = split;
  for (auto& m : out.sigma1) {
    m.right *= s;
    m.left /= s;
  }
  return out;
}

}  // namespace ssmflow
