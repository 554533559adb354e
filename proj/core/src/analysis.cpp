#include "ssmflow/analysis.hpp"

#include <cmath>

#include "ssmflow/errors.hpp"

namespace ssmflow {

FlowContext FlowContext::make(const ModeGrid& grid, const ModelParams& params) {
  grid.validate();
  params.validate(grid.nfields);
  return FlowContext{grid, cheb_matrices(grid.n2), params};
}

namespace {

ModelParams with_param(const ModelParams& p, ContParam which, double value) {
  ModelParams q = p;
  (which == ContParam::re ? q.re : q.wi) = value;
  return q;
}

}  // namespace

std::vector<EigenPair> laminar_spectrum(const FlowContext& ctx, int count) {
  const StateVector lam = laminar_state(ctx.grid, ctx.cheb, ctx.params);
  const OperatorPair ops =
      assemble_linearization(ctx.grid, ctx.cheb, ctx.params, lam);
  const SpectrumBoundConstants sb =
      spectrum_bound_constants(ctx.grid, ctx.cheb, lam);
  return solve_generalized_eig(ops, default_shift(sb), count);
}

Complex leading_eigenvalue(const FlowContext& ctx) {
  const auto eigs = laminar_spectrum(ctx, 1);
  if (eigs.empty()) throw EigenError("no finite eigenvalues found");
  return eigs.front().lambda;
}

double find_critical_param(FlowContext ctx, ContParam which, double lo,
                           double hi, double rel_tol) {
  auto growth = [&](double v) {
    ctx.params = with_param(ctx.params, which, v);
    return leading_eigenvalue(ctx).real();
  };
  double flo = growth(lo), fhi = growth(hi);
  if (flo * fhi > 0.0)
    throw SolverError("find_critical_param: no sign change on [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
  while (hi - lo > rel_tol * std::max(1.0, std::abs(hi))) {
    const double mid = 0.5 * (lo + hi);
    const double fm = growth(mid);
    if ((fm > 0) == (fhi > 0)) {
      hi = mid;
      fhi = fm;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

NewtonProblem steady_problem(const FlowContext& ctx) {
  NewtonProblem p;
  p.eval = [ctx](const VectorXcd& x, VectorXcd& res, MatrixXcd* jac) {
    auto sys = assemble_steady(ctx.grid, ctx.cheb, ctx.params, x);
    res = std::move(sys.residual);
    if (jac) *jac = std::move(sys.jacobian);
  };
  p.project = [g = ctx.grid](VectorXcd& x) { symmetrize_full(g, x); };
  return p;
}

ContinuationProblem continuation_problem(FlowContext ctx, ContParam which,
                                         bool phase_row) {
  ContinuationProblem p;
  p.eval = [ctx, which, phase_row](const VectorXcd& x, double prm,
                                   VectorXcd& res, MatrixXcd* jac) {
    const ModelParams mp = with_param(ctx.params, which, prm);
    auto sys = assemble_steady(ctx.grid, ctx.cheb, mp, x, {phase_row});
    res = std::move(sys.residual);
    if (jac) *jac = std::move(sys.jacobian);
  };
  p.project = [g = ctx.grid](VectorXcd& x) { symmetrize_full(g, x); };
  p.observe = [ctx, which](const VectorXcd& x, double prm) {
    const ModelParams mp = with_param(ctx.params, which, prm);
    const StateVector lam = laminar_state(ctx.grid, ctx.cheb, mp);
    StateVector st = extract_half(ctx.grid, x);
    StateVector pert = st;
    pert.coeffs -= lam.coeffs;
    return observables(ctx.grid, ctx.cheb, mp, pert, &lam);
  };
  return p;
}

TwSeedResult seed_travelling_wave(FlowContext ctx, ContParam which,
                                  double param_at, const TwSeedOptions& opt) {
  ctx.params = with_param(ctx.params, which, param_at);
  const StateVector lam = laminar_state(ctx.grid, ctx.cheb, ctx.params);
  const OperatorPair ops =
      assemble_linearization(ctx.grid, ctx.cheb, ctx.params, lam);
  const SpectrumBoundConstants sb =
      spectrum_bound_constants(ctx.grid, ctx.cheb, lam);
  const auto eigs = solve_generalized_eig(ops, default_shift(sb), 4);
  if (eigs.empty()) throw EigenError("seed_travelling_wave: empty spectrum");

  // leading mode with positive frequency; the conjugate pairs automatically
  EigenPair mode = eigs.front();
  for (const auto& e : eigs)
    if (std::abs(e.lambda.real() - mode.lambda.real()) <
            1e-10 * (1.0 + std::abs(mode.lambda.real())) &&
        e.lambda.imag() > mode.lambda.imag())
      mode = e;

  const double en = energy_of_full(ctx.grid, ctx.cheb, mode.right);
  const VectorXcd dir = mode.right / std::sqrt(2.0 * std::max(en, 1e-300));
  // real bifurcating direction in state space, unit norm
  VectorXcd du = dir + conj_reflect(ctx.grid, dir);
  du[ctx.grid.c_slot()] = 0.0;
  du[ctx.grid.f_slot()] = 0.0;
  du /= du.norm();
  const double c0 = mode.lambda.imag() / ctx.grid.k;

  VectorXcd base = embed_full(ctx.grid, lam);
  base[ctx.grid.c_slot()] = c0;
  const ContinuationProblem prob = continuation_problem(ctx, which);

  for (double amp : opt.amplitudes) {
    // amplitude-pinned corrector with the parameter free: lands on the
    // bifurcating branch on whichever side of the critical point it lives
    const VectorXcd u_pred = base + amp * du;
    const CorrectorResult c = arclength_corrector(prob, u_pred, param_at, du,
                                                  0.0, 1.0, opt.newton);
    if (!c.converged) continue;
    const ModelParams found = with_param(ctx.params, which, c.param);
    const StateVector lam_found = laminar_state(ctx.grid, ctx.cheb, found);
    StateVector st = extract_half(ctx.grid, c.u);
    StateVector pert = st;
    pert.coeffs -= lam_found.coeffs;
    const ObsRecord ob = observables(ctx.grid, ctx.cheb, found, pert);
    if (ob.e > opt.nontrivial_e) {
      TwSeedResult out;
      out.state = std::move(st);
      out.param = c.param;
      out.lambda_crit = mode.lambda;
      return out;
    }
  }
  throw SolverError(
      "seed_travelling_wave: amplitude-pinned corrector found no nontrivial "
      "wave; start closer to the bifurcation or adjust the amplitudes");
}

int count_unstable(const FlowContext& ctx, const StateVector& base) {
  const OperatorPair ops =
      assemble_linearization(ctx.grid, ctx.cheb, ctx.params, base);
  const SpectrumBoundConstants sb =
      spectrum_bound_constants(ctx.grid, ctx.cheb, base);
  const auto eigs = solve_generalized_eig(ops, default_shift(sb), 0);
  int n = 0;
  for (const auto& e : eigs)
    if (e.lambda.real() > 0.0) ++n;
  return n;
}

BilinearFn bilinear_fn(const FlowContext& ctx) {
  return [ctx](const VectorXcd& x, const VectorXcd& y) {
    return apply_bilinear(ctx.grid, ctx.cheb, ctx.params, x, y);
  };
}

EnergyFn energy_fn(const FlowContext& ctx) {
  return [ctx](const VectorXcd& x) {
    return energy_of_full(ctx.grid, ctx.cheb, x);
  };
}

DefectNormFn defect_norm_fn(const FlowContext& ctx) {
  return [ctx](const VectorXcd& x) {
    return defect_norm(ctx.grid, ctx.cheb, x);
  };
}

SsmData ssm_about_state(const FlowContext& ctx, const StateVector& base,
                        double beta_split, const SsmConfig& config,
                        double gap_tol) {
  SsmData d;
  d.base = base;
  d.ops = assemble_linearization(ctx.grid, ctx.cheb, ctx.params, base);
  const SpectrumBoundConstants sb =
      spectrum_bound_constants(ctx.grid, ctx.cheb, base);
  d.spectrum = solve_generalized_eig(d.ops, default_shift(sb), 0);
  SplitOptions sopt;
  sopt.gap_tol = gap_tol;
  sopt.energy = energy_fn(ctx);
  d.split = split_spectrum(d.spectrum, d.ops, beta_split, sopt);
  d.table = compute_expansion(d.split, d.ops, bilinear_fn(ctx), config);
  return d;
}

SsmData ssm_about_laminar(const FlowContext& ctx, double beta_split,
                          const SsmConfig& config, double gap_tol) {
  return ssm_about_state(ctx, laminar_state(ctx.grid, ctx.cheb, ctx.params),
                         beta_split, config, gap_tol);
}

}  // namespace ssmflow
