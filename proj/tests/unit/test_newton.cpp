#include <doctest.h>

#include <cmath>

#include "ssmflow/analysis.hpp"
#include "ssmflow/errors.hpp"
#include "ssmflow/newton.hpp"

using namespace ssmflow;

TEST_SUITE_BEGIN("newton");

TEST_CASE("scalar quadratic sanity") {
  NewtonProblem p;
  p.eval = [](const VectorXcd& x, VectorXcd& res, MatrixXcd* jac) {
    res.resize(1);
    res[0] = x[0] * x[0] - 4.0;
    if (jac) {
      jac->resize(1, 1);
      (*jac)(0, 0) = 2.0 * x[0];
    }
  };
  VectorXcd guess(1);
  guess[0] = 3.0;
  const NewtonResult r = newton_solve(p, guess, {1e-12, 10});
  CHECK(r.converged);
  CHECK(r.iterations <= 6);
  CHECK(std::abs(r.x[0] - 2.0) < 1e-10);
}

TEST_CASE("exact laminar guess converges immediately") {
  ModeGrid g;
  g.k = 1.0;
  g.n1 = 2;
  g.n2 = 12;
  g.nfields = 3;
  ModelParams prm;
  prm.re = 700.0;
  const FlowContext ctx = FlowContext::make(g, prm);
  const StateVector lam = laminar_state(ctx.grid, ctx.cheb, ctx.params);
  const NewtonProblem p = steady_problem(ctx);
  const NewtonResult r = newton_solve(p, embed_full(g, lam), {1e-10, 5});
  CHECK(r.converged);
  CHECK(r.iterations <= 1);
}

namespace {

// x^2 + lambda^2 = 1, one unknown, one parameter: folds at lambda = +-1
ContinuationProblem circle_problem() {
  ContinuationProblem p;
  p.eval = [](const VectorXcd& u, double prm, VectorXcd& res, MatrixXcd* jac) {
    res.resize(1);
    res[0] = u[0] * u[0] + prm * prm - 1.0;
    if (jac) {
      jac->resize(1, 1);
      (*jac)(0, 0) = 2.0 * u[0];
    }
  };
  return p;
}

}  // namespace

TEST_CASE("circle fold detection to 1e-8") {
  const ContinuationProblem p = circle_problem();
  BranchPoint start;
  start.u = VectorXcd::Zero(1);
  start.u[0] = 1.0;
  start.param = 0.0;

  ContinuationOptions opt;
  opt.step0 = 0.1;
  opt.param_min = -2.0;
  opt.param_max = 2.0;
  opt.max_points = 400;
  opt.fold_rel_tol = 1e-10;
  opt.newton.tol = 1e-13;

  const Branch br = continue_branch(p, start, +1, opt);
  REQUIRE(!br.folds.empty());
  CHECK(std::abs(std::abs(br.folds.front()) - 1.0) < 1e-8);
  // the branch rounds the fold: x goes negative afterwards
  CHECK(br.points.back().u[0].real() < 0.0);
  // every accepted point satisfies the circle equation
  for (const auto& pt : br.points) {
    const double v = std::abs(pt.u[0] * pt.u[0] + pt.param * pt.param - 1.0);
    CHECK(v < 1e-10);
  }
}

TEST_CASE("laminar branch is flat in e") {
  ModeGrid g;
  g.k = 1.0;
  g.n1 = 1;
  g.n2 = 10;
  g.nfields = 3;
  ModelParams prm;
  prm.re = 500.0;
  const FlowContext ctx = FlowContext::make(g, prm);
  // the laminar branch is x1-independent: continue without the phase row
  ContinuationProblem p =
      continuation_problem(ctx, ContParam::re, /*phase_row=*/false);
  BranchPoint start;
  start.u = embed_full(g, laminar_state(ctx.grid, ctx.cheb, ctx.params));
  start.param = 500.0;
  start.obs = p.observe(start.u, start.param);
  ContinuationOptions opt;
  opt.step0 = 50.0;
  opt.param_min = 400.0;
  opt.param_max = 1200.0;
  opt.max_points = 40;
  const Branch br = continue_branch(p, start, +1, opt);
  CHECK(br.points.size() >= 5);
  CHECK(br.folds.empty());
  for (const auto& pt : br.points) {
    REQUIRE(pt.obs.has_value());
    CHECK(pt.obs->e < 1e-16);
  }
}

TEST_CASE("travelling waves at coarse resolution") {
  // k = 0.85 branch machinery on a desk-top grid
  ModeGrid g;
  g.k = 0.85;
  g.n1 = 4;
  g.n2 = 28;
  g.nfields = 3;
  ModelParams prm;
  prm.re = 5000.0;
  FlowContext ctx = FlowContext::make(g, prm);

  const double re_c =
      find_critical_param(ctx, ContParam::re, 5000.0, 6000.0, 1e-5);
  CAPTURE(re_c);
  CHECK(re_c > 5000.0);
  CHECK(re_c < 6000.0);

  const TwSeedResult tw = seed_travelling_wave(ctx, ContParam::re, re_c + 40.0);
  ctx.params.re = tw.param;

  SUBCASE("seeded wave is converged and nontrivial") {
    const VectorXcd res = steady_residual(ctx.grid, ctx.cheb, ctx.params,
                                          embed_full(ctx.grid, tw.state));
    CHECK(res.cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(tw.state.c) > 0.1);  // travelling, not steady
  }

  SUBCASE("conjugate-phase branch has identical observables") {
    // the x1-reflected wave travels at -c and solves the same system
    StateVector refl = tw.state;
    refl.coeffs = tw.state.coeffs.conjugate();
    refl.c = -tw.state.c;
    const VectorXcd res = steady_residual(ctx.grid, ctx.cheb, ctx.params,
                                          embed_full(ctx.grid, refl));
    CHECK(res.cwiseAbs().maxCoeff() < 1e-10);

    ContinuationProblem p = continuation_problem(ctx, ContParam::re);
    ContinuationOptions opt;
    opt.step0 = 5.0;
    opt.param_min = re_c - 10.0;
    opt.param_max = re_c + 90.0;
    opt.max_points = 6;
    opt.newton.max_iter = 12;

    BranchPoint s1, s2;
    s1.u = embed_full(ctx.grid, tw.state);
    s1.param = tw.param;
    s2.u = embed_full(ctx.grid, refl);
    s2.param = tw.param;
    const Branch b1 = continue_branch(p, s1, +1, opt);
    const Branch b2 = continue_branch(p, s2, +1, opt);
    REQUIRE(b1.points.size() >= 3);
    REQUIRE(b1.points.size() == b2.points.size());
    for (size_t i = 0; i < b1.points.size(); ++i) {
      REQUIRE(b1.points[i].obs.has_value());
      REQUIRE(b2.points[i].obs.has_value());
      CHECK(b1.points[i].param ==
            doctest::Approx(b2.points[i].param).epsilon(1e-9));
      CHECK(b1.points[i].obs->e ==
            doctest::Approx(b2.points[i].obs->e).epsilon(1e-9));
      CHECK(b1.points[i].obs->d ==
            doctest::Approx(b2.points[i].obs->d).epsilon(1e-9));
    }
  }

  SUBCASE("newton_at_param lands on a requested value") {
    ContinuationProblem p = continuation_problem(ctx, ContParam::re);
    const double target = tw.param + 7.0;
    const NewtonResult r =
        newton_at_param(p, embed_full(ctx.grid, tw.state), target, {1e-10, 15});
    CHECK(r.converged);
  }
}

TEST_SUITE_END();
