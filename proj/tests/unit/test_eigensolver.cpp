#include <doctest.h>

#include <cmath>

#include "ssmflow/analysis.hpp"
#include "ssmflow/eigensolver.hpp"
#include "ssmflow/errors.hpp"

using namespace ssmflow;

TEST_SUITE_BEGIN("eigensolver");

TEST_CASE("singular diagonal pencil filters the M-null direction") {
  MatrixXcd A = MatrixXcd::Zero(3, 3);
  A.diagonal() << 1.0, 2.0, 3.0;
  MatrixXcd M = MatrixXcd::Zero(3, 3);
  M.diagonal() << 1.0, 1.0, 0.0;
  const OperatorPair ops(A, M);
  const auto eigs = solve_generalized_eig(ops, Complex(4.0, 0.5), 0);
  REQUIRE(eigs.size() == 2);
  CHECK(eigs[0].lambda.real() == doctest::Approx(2.0));
  CHECK(eigs[1].lambda.real() == doctest::Approx(1.0));
}

TEST_CASE("dense and arnoldi paths agree") {
  const int n = 60;
  MatrixXcd A = MatrixXcd::Zero(n, n);
  MatrixXcd M = MatrixXcd::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    A(i, i) = Complex(-0.1 * i, 0.3 * i);
    if (i + 1 < n) A(i, i + 1) = 0.05;
  }
  M(n - 1, n - 1) = 0.0;  // one infinite eigenvalue
  const OperatorPair ops(A, M);

  const auto dense = solve_generalized_eig(ops, Complex(1.0, 0.0), 6);
  EigOptions aopt;
  aopt.force_arnoldi = true;
  const auto arn = solve_generalized_eig(ops, Complex(1.0, 0.0), 6, aopt);
  REQUIRE(dense.size() >= 4);
  REQUIRE(arn.size() >= 4);
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(dense[size_t(i)].lambda - arn[size_t(i)].lambda) < 1e-7);
}

TEST_CASE("shift independence") {
  const int n = 40;
  MatrixXcd A = MatrixXcd::Random(n, n);
  MatrixXcd M = MatrixXcd::Identity(n, n);
  const OperatorPair ops(A, M);
  EigOptions aopt;
  aopt.force_arnoldi = true;
  aopt.arnoldi_extra = 40;
  const auto e1 = solve_generalized_eig(ops, Complex(0.5, 0.2), 5, aopt);
  const auto e2 = solve_generalized_eig(ops, Complex(1.5, -0.4), 5, aopt);
  REQUIRE(e1.size() >= 3);
  REQUIRE(e2.size() >= 3);
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(e1[size_t(i)].lambda - e2[size_t(i)].lambda) < 1e-7);
}

namespace {

FlowContext laminar_ctx(double re, double k, int n1, int n2) {
  ModeGrid g;
  g.k = k;
  g.n1 = n1;
  g.n2 = n2;
  g.nfields = 3;
  ModelParams p;
  p.re = re;
  return FlowContext::make(g, p);
}

}  // namespace

TEST_CASE("paper leading eigenvalue at Re=3600, k=1.02056") {
  const FlowContext ctx = laminar_ctx(3600.0, 1.02056, 30, 40);
  const Complex lam = leading_eigenvalue(ctx);
  const Complex ref(-0.00105, 0.409);
  CHECK(std::abs(lam - ref) / std::abs(ref) < 0.01);
}

TEST_CASE("conjugate pairing across +-n blocks") {
  const FlowContext ctx = laminar_ctx(1500.0, 1.1, 2, 16);
  const auto eigs = laminar_spectrum(ctx, 0);
  REQUIRE(!eigs.empty());
  for (const auto& e : eigs) {
    if (std::abs(e.lambda.imag()) < 1e-12) continue;
    bool found = false;
    for (const auto& o : eigs)
      if (std::abs(o.lambda - std::conj(e.lambda)) <
          1e-7 * (1.0 + std::abs(e.lambda)))
        found = true;
    CHECK(found);
  }
}

TEST_CASE("residual bound on returned pairs") {
  const FlowContext ctx = laminar_ctx(2000.0, 1.0, 2, 18);
  const StateVector lam = laminar_state(ctx.grid, ctx.cheb, ctx.params);
  const OperatorPair ops =
      assemble_linearization(ctx.grid, ctx.cheb, ctx.params, lam);
  const auto eigs = solve_generalized_eig(ops, Complex(1.0, 0.5), 10);
  REQUIRE(!eigs.empty());
  for (const auto& e : eigs) {
    const double res =
        (ops.apply_a(e.right) - e.lambda * ops.apply_m(e.right)).norm() /
        e.right.norm();
    CHECK(res < 1e-8);
  }
}

TEST_CASE("theorem-2.1 envelope for the laminar spectrum") {
  const FlowContext ctx = laminar_ctx(3000.0, 1.02056, 3, 24);
  const StateVector lam = laminar_state(ctx.grid, ctx.cheb, ctx.params);
  const SpectrumBoundConstants sb =
      spectrum_bound_constants(ctx.grid, ctx.cheb, lam);
  const auto eigs = laminar_spectrum(ctx, 0);
  REQUIRE(!eigs.empty());
  for (const auto& e : eigs)
    CHECK(spectrum_envelope_holds(sb, ctx.params.re, e.lambda));
}

TEST_CASE("split_spectrum") {
  SUBCASE("self-adjoint 2x2") {
    MatrixXcd A = MatrixXcd::Zero(2, 2);
    A.diagonal() << 1.0, -1.0;
    const OperatorPair ops(A, MatrixXcd::Identity(2, 2));
    const auto eigs = solve_generalized_eig(ops, Complex(2.0, 0.0), 0);
    const SpectralSplit sp = split_spectrum(eigs, ops, 0.0);
    REQUIRE(sp.r() == 1);
    CHECK(sp.sigma1[0].lambda.real() == doctest::Approx(1.0));
    CHECK(std::abs(sp.sigma1[0].right[0]) > 0.99);  // e1 up to phase
    CHECK(std::abs(sp.sigma1[0].left[0]) > 0.99);
    REQUIRE(sp.sigma2_values.size() == 1);
  }

  SUBCASE("beta above the spectrum is rejected") {
    MatrixXcd A = MatrixXcd::Zero(2, 2);
    A.diagonal() << Complex(-1.0, 0.4), Complex(-2.0, 0.0);
    const OperatorPair ops(A, MatrixXcd::Identity(2, 2));
    const auto eigs = solve_generalized_eig(ops, Complex(0.0, 0.0), 0);
    CHECK_THROWS_AS((void)split_spectrum(eigs, ops, 0.5), EigenError);
  }

  SUBCASE("eigenvalue inside the gap band is rejected") {
    MatrixXcd A = MatrixXcd::Zero(2, 2);
    A.diagonal() << Complex(-0.10001, 0.0), Complex(-2.0, 0.0);
    const OperatorPair ops(A, MatrixXcd::Identity(2, 2));
    const auto eigs = solve_generalized_eig(ops, Complex(0.0, 0.0), 0);
    SplitOptions opt;
    opt.gap_tol = 1e-3;
    CHECK_THROWS_AS((void)split_spectrum(eigs, ops, -0.1, opt), EigenError);
  }

  SUBCASE("laminar pair: biorthonormality and conjugate canonicalization") {
    const FlowContext ctx = laminar_ctx(3600.0, 1.02056, 4, 32);
    const StateVector lam = laminar_state(ctx.grid, ctx.cheb, ctx.params);
    const OperatorPair ops =
        assemble_linearization(ctx.grid, ctx.cheb, ctx.params, lam);
    const auto eigs = solve_generalized_eig(ops, Complex(1.0, 0.5), 0);
    SplitOptions opt;
    opt.energy = energy_fn(ctx);
    const SpectralSplit sp = split_spectrum(eigs, ops, -0.002, opt);
    REQUIRE(sp.r() == 2);
    CHECK(sp.sigma1[0].lambda.imag() > 0.0);
    CHECK(std::abs(sp.sigma1[1].lambda - std::conj(sp.sigma1[0].lambda)) <
          1e-10);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const Complex v = sp.sigma1[size_t(i)].left.dot(
            ops.apply_m(sp.sigma1[size_t(j)].right));
        CHECK(std::abs(v - (i == j ? 1.0 : 0.0)) < 1e-10);
      }
    // left-vector consistency across members
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        if (i == j) continue;
        const auto& ki = sp.sigma1[size_t(j)];
        const Complex v = sp.sigma1[size_t(i)].left.dot(
            ops.apply_a(ki.right) - ki.lambda * ops.apply_m(ki.right));
        CHECK(std::abs(v) < 1e-8);
      }
    const EnergyFn en = energy_fn(ctx);
    CHECK(en(sp.sigma1[0].right) == doctest::Approx(0.5).epsilon(1e-10));
  }
}

TEST_SUITE_END();
