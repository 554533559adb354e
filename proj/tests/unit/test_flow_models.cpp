#include <doctest.h>

#include <cmath>
#include <random>

#include "ssmflow/analysis.hpp"
#include "ssmflow/errors.hpp"
#include "ssmflow/flow_models.hpp"
#include "ssmflow/state.hpp"

using namespace ssmflow;

TEST_SUITE_BEGIN("flow_models");

namespace {

ModeGrid newt_grid(double k = 1.1, int n1 = 3, int n2 = 10) {
  ModeGrid g;
  g.k = k;
  g.n1 = n1;
  g.n2 = n2;
  g.nfields = 3;
  return g;
}

ModeGrid ob_grid(double k = 2.3, int n1 = 2, int n2 = 12) {
  ModeGrid g;
  g.k = k;
  g.n1 = n1;
  g.n2 = n2;
  g.nfields = 6;
  return g;
}

ModelParams newt_params(double re = 1000.0) {
  ModelParams p;
  p.re = re;
  return p;
}

ModelParams ob_params() {
  ModelParams p;
  p.re = 0.0;
  p.wi = 13.6;
  p.beta_visc = 0.9;
  p.eps = 1e-2;
  p.xhat2 = 0.3;
  return p;
}

StateVector random_state(const ModeGrid& g, unsigned seed, double scale = 1.0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  StateVector st(g);
  for (Eigen::Index i = 0; i < st.coeffs.size(); ++i)
    st.coeffs[i] = Complex(dist(rng), dist(rng));
  for (int f = 0; f < g.nfields; ++f)
    for (int m = 0; m <= g.n2; ++m)
      st.at(g, 0, f, m) = st.at(g, 0, f, m).real();
  st.f = dist(rng);
  st.c = dist(rng);
  return st;
}

// physical-space product-then-project oracle on a 4x-oversampled streamwise
// grid; exact for the band-limited fields involved
VectorXcd bilinear_oracle(const ModeGrid& g, const ChebMatrices& cheb,
                          const ModelParams& p, const StateVector& xs,
                          const StateVector& ys) {
  const int nx = 8 * g.n1 + 9;
  const int nc = g.cheb();
  const double sk = g.fourier_norm();
  const VectorXcd xf = embed_full(g, xs), yf = embed_full(g, ys);

  auto prof = [&](const VectorXcd& full, int f, bool deriv) {
    MatrixXcd out(nc, g.modes_full());
    for (int n = -g.n1; n <= g.n1; ++n)
      out.col(n + g.n1) = sk * ((deriv ? cheb.d1 : cheb.eval) *
                                full.segment(g.full_index(n, f, 0), nc));
    return out;
  };
  auto phys = [&](const MatrixXcd& pr, bool dx1, int i, int s) {
    Complex acc = 0;
    const double x1 = 2.0 * M_PI / g.k * double(i) / double(nx);
    for (int n = -g.n1; n <= g.n1; ++n) {
      Complex v = pr(s, n + g.n1) * std::polar(1.0, double(n) * g.k * x1);
      if (dx1) v *= Complex(0, double(n) * g.k);
      acc += v;
    }
    return acc.real();
  };

  std::vector<MatrixXcd> xv, xdv, yv, ydv;
  for (int f = 0; f < g.nfields; ++f) {
    xv.push_back(prof(xf, f, false));
    xdv.push_back(prof(xf, f, true));
    yv.push_back(prof(yf, f, false));
    ydv.push_back(prof(yf, f, true));
  }

  const double vel = (g.nfields == 3) ? 1.0 : p.re;
  VectorXcd out = VectorXcd::Zero(g.full_size());
  for (int s = 0; s < nc; ++s) {
    std::vector<std::vector<double>> rows(size_t(g.nfields),
                                          std::vector<double>(size_t(nx), 0.0));
    for (int i = 0; i < nx; ++i) {
      const double xu1 = phys(xv[FU1], false, i, s);
      const double xu2 = phys(xv[FU2], false, i, s);
      if (s != 0 && s != g.n2) {
        rows[FU1][size_t(i)] = vel * (xu1 * phys(yv[FU1], true, i, s) +
                                      xu2 * phys(ydv[FU1], false, i, s));
        rows[FU2][size_t(i)] = vel * (xu1 * phys(yv[FU2], true, i, s) +
                                      xu2 * phys(ydv[FU2], false, i, s));
      }
      if (g.nfields == 6) {
        const double g11 = phys(xv[FU1], true, i, s);
        const double g12 = phys(xdv[FU1], false, i, s);
        const double g21 = phys(xv[FU2], true, i, s);
        const double g22 = phys(xdv[FU2], false, i, s);
        const double t11 = phys(yv[FT11], false, i, s);
        const double t12 = phys(yv[FT12], false, i, s);
        const double t22 = phys(yv[FT22], false, i, s);
        rows[FT11][size_t(i)] = xu1 * phys(yv[FT11], true, i, s) +
                                xu2 * phys(ydv[FT11], false, i, s) -
                                2.0 * (g11 * t11 + g12 * t12);
        rows[FT12][size_t(i)] = xu1 * phys(yv[FT12], true, i, s) +
                                xu2 * phys(ydv[FT12], false, i, s) -
                                (g11 * t12 + g12 * t22 + g21 * t11 + g22 * t12);
        rows[FT22][size_t(i)] = xu1 * phys(yv[FT22], true, i, s) +
                                xu2 * phys(ydv[FT22], false, i, s) -
                                2.0 * (g21 * t12 + g22 * t22);
      }
    }
    for (int f = 0; f < g.nfields; ++f) {
      if (f == FP) continue;
      for (int n = -g.n1; n <= g.n1; ++n) {
        Complex acc = 0;
        for (int i = 0; i < nx; ++i) {
          const double x1 = 2.0 * M_PI / g.k * double(i) / double(nx);
          acc += rows[size_t(f)][size_t(i)] *
                 std::polar(1.0, -double(n) * g.k * x1);
        }
        out[g.full_index(n, f, s)] = acc / double(nx);
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("newtonian laminar state") {
  const ModeGrid g = newt_grid(1.02056, 2, 24);
  const ChebMatrices cheb = cheb_matrices(g.n2);
  const ModelParams p = newt_params(3600.0);
  const StateVector lam = laminar_state(g, cheb, p);

  SUBCASE("matches the analytic parabola and f = 3/Re") {
    CHECK(lam.f == doctest::Approx(3.0 / p.re).epsilon(1e-12));
    const double sk = g.fourier_norm();
    CHECK(lam.at(g, 0, FU1, 0).real() * sk ==
          doctest::Approx(0.75).epsilon(1e-12));
    CHECK(lam.at(g, 0, FU1, 2).real() * sk ==
          doctest::Approx(-0.75).epsilon(1e-12));
    for (int m = 0; m <= g.n2; ++m) {
      if (m == 0 || m == 2) continue;
      CHECK(std::abs(lam.at(g, 0, FU1, m)) < 1e-12);
    }
  }
  SUBCASE("unit mean flux") {
    double mean = 0.0;
    const double sk = g.fourier_norm();
    for (int m = 0; m <= g.n2; ++m)
      mean += 0.5 * sk * cheb.moments[m] * lam.at(g, 0, FU1, m).real();
    CHECK(mean == doctest::Approx(1.0).epsilon(1e-13));
  }
  SUBCASE("steady residual vanishes") {
    const VectorXcd res = steady_residual(g, cheb, p, embed_full(g, lam),
                                          {/*phase_row=*/false});
    CHECK(res.cwiseAbs().maxCoeff() < 1e-11);
  }
}

TEST_CASE("oldroyd-b laminar state") {
  const ModeGrid g = ob_grid();
  const ChebMatrices cheb = cheb_matrices(g.n2);
  const ModelParams p = ob_params();
  const StateVector lam = laminar_state(g, cheb, p);

  SUBCASE("steady residual below 1e-10") {
    const VectorXcd res = steady_residual(g, cheb, p, embed_full(g, lam),
                                          {/*phase_row=*/false});
    CHECK(res.cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("trace of base stress positive pointwise") {
    const VectorXd xq = gauss_lobatto_points(4 * g.n2);
    const MatrixXd Eq = cheb_eval_at(g.n2, xq);
    const double sk = g.fourier_norm();
    VectorXd tr = VectorXd::Zero(xq.size());
    for (int m = 0; m <= g.n2; ++m)
      tr += sk *
            (lam.at(g, 0, FT11, m).real() + lam.at(g, 0, FT22, m).real()) *
            Eq.col(m);
    for (Eigen::Index i = 0; i < tr.size(); ++i) CHECK(tr[i] > 0.0);
  }
  SUBCASE("velocity stays close to the parabola") {
    const VectorXd xq = gauss_lobatto_points(32);
    const MatrixXd Eq = cheb_eval_at(g.n2, xq);
    const double sk = g.fourier_norm();
    for (Eigen::Index i = 0; i < xq.size(); ++i) {
      double u = 0;
      for (int m = 0; m <= g.n2; ++m)
        u += sk * lam.at(g, 0, FU1, m).real() * Eq(i, m);
      CHECK(u == doctest::Approx(1.5 * (1 - xq[i] * xq[i])).epsilon(0.05));
    }
  }
}

TEST_CASE("bilinear operator") {
  const ModeGrid g = newt_grid();
  const ChebMatrices cheb = cheb_matrices(g.n2);
  const ModelParams p = newt_params();

  SUBCASE("B(0, y) = 0") {
    const StateVector y = random_state(g, 1);
    StateVector z(g);
    const VectorXcd out = apply_bilinear(g, cheb, p, z, y);
    CHECK(out.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("parallel base advects itself to zero") {
    const StateVector lam = laminar_state(g, cheb, newt_params(500.0));
    const VectorXcd out = apply_bilinear(g, cheb, p, lam, lam);
    CHECK(out.cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("matches the oversampled physical-space oracle (newtonian)") {
    for (unsigned seed : {2u, 3u, 4u}) {
      const StateVector x = random_state(g, seed);
      const StateVector y = random_state(g, seed + 100);
      const VectorXcd got = apply_bilinear(g, cheb, p, x, y);
      const VectorXcd want = bilinear_oracle(g, cheb, p, x, y);
      const double scale = want.cwiseAbs().maxCoeff();
      CHECK((got - want).cwiseAbs().maxCoeff() < 1e-10 * std::max(scale, 1.0));
    }
  }

  SUBCASE("matches the oracle (oldroyd-b)") {
    const ModeGrid go = ob_grid();
    const ChebMatrices co = cheb_matrices(go.n2);
    const ModelParams po = ob_params();
    for (unsigned seed : {5u, 6u}) {
      const StateVector x = random_state(go, seed);
      const StateVector y = random_state(go, seed + 50);
      const VectorXcd got = apply_bilinear(go, co, po, x, y);
      const VectorXcd want = bilinear_oracle(go, co, po, x, y);
      const double scale = want.cwiseAbs().maxCoeff();
      CHECK((got - want).cwiseAbs().maxCoeff() < 1e-10 * std::max(scale, 1.0));
    }
  }

  SUBCASE("linearity in each slot") {
    std::mt19937 rng(17);
    std::normal_distribution<double> dist;
    const StateVector x = random_state(g, 21);
    const StateVector y = random_state(g, 22);
    const StateVector z = random_state(g, 23);
    const Complex a(dist(rng), dist(rng));
    const VectorXcd xf = embed_full(g, x), yf = embed_full(g, y),
                    zf = embed_full(g, z);
    const VectorXcd lhs = apply_bilinear(g, cheb, p, xf, yf + a * zf);
    const VectorXcd rhs = apply_bilinear(g, cheb, p, xf, yf) +
                          a * apply_bilinear(g, cheb, p, xf, zf);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <
          1e-12 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
    const VectorXcd lhs2 = apply_bilinear(g, cheb, p, xf + a * zf, yf);
    const VectorXcd rhs2 = apply_bilinear(g, cheb, p, xf, yf) +
                           a * apply_bilinear(g, cheb, p, zf, yf);
    CHECK((lhs2 - rhs2).cwiseAbs().maxCoeff() <
          1e-12 * std::max(1.0, rhs2.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("steady assembly") {
  const ModeGrid g = newt_grid();
  const ChebMatrices cheb = cheb_matrices(g.n2);
  const ModelParams p = newt_params(800.0);

  SUBCASE("jacobian matches finite differences") {
    for (const bool oldb : {false, true}) {
      const ModeGrid gg = oldb ? ob_grid() : g;
      const ChebMatrices cc = cheb_matrices(gg.n2);
      const ModelParams pp = oldb ? ob_params() : p;
      const StateVector base = random_state(gg, 31, 0.3);
      const VectorXcd v0 = embed_full(gg, base);
      const auto sys = assemble_steady(gg, cc, pp, v0);
      const StateVector dw = random_state(gg, 32, 1.0);
      const VectorXcd w = embed_full(gg, dw);
      const double h = 1e-7;
      const VectorXcd rp = steady_residual(gg, cc, pp, v0 + h * w);
      const VectorXcd rm = steady_residual(gg, cc, pp, v0 - h * w);
      const VectorXcd fd = (rp - rm) / (2.0 * h);
      const VectorXcd an = sys.jacobian * w;
      const double rel = (fd - an).cwiseAbs().maxCoeff() /
                         std::max(1.0, an.cwiseAbs().maxCoeff());
      CHECK(rel < 1e-5);
    }
  }

  SUBCASE("laminar residual zero with analytic f, c = 0") {
    const StateVector lam = laminar_state(g, cheb, p);
    // with the phase row active too: the laminar state satisfies it
    const VectorXcd res = steady_residual(g, cheb, p, embed_full(g, lam));
    CHECK(res.cwiseAbs().maxCoeff() < 1e-11);
  }

  SUBCASE("phase row: cos is admissible, sin is not") {
    StateVector cosp(g), sinp(g);
    // profile T_2 has nonzero wall-normal mean, so the functional sees it
    // u1 ~ cos(k x1) T_2(x2): stored n=1 coefficient real
    cosp.at(g, 1, FU1, 2) = 0.5;
    // u1 ~ sin(k x1) T_2(x2): stored n=1 coefficient -i/2
    sinp.at(g, 1, FU1, 2) = Complex(0.0, -0.5);
    const VectorXcd rc = steady_residual(g, cheb, p, embed_full(g, cosp));
    const VectorXcd rs = steady_residual(g, cheb, p, embed_full(g, sinp));
    const Eigen::Index phase_row = g.c_slot();
    CHECK(std::abs(rc[phase_row]) < 1e-14);
    CHECK(std::abs(rs[phase_row]) > 1e-3);
  }
}

TEST_CASE("linearization pencil") {
  const ModeGrid g = newt_grid();
  const ChebMatrices cheb = cheb_matrices(g.n2);
  const ModelParams p = newt_params(900.0);
  const StateVector lam = laminar_state(g, cheb, p);
  const OperatorPair ops = assemble_linearization(g, cheb, p, lam);

  SUBCASE("laminar pencil is structured and block-decoupled") {
    CHECK(ops.structured);
    // dense assembly with the trivial-c row agrees entry-for-entry
    const MatrixXcd dense =
        assemble_steady(g, cheb, p, embed_full(g, lam), {/*phase_row=*/false})
            .jacobian;
    const MatrixXcd blk = ops.a_dense();
    CHECK((dense - blk).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("mass operator kills pressure-only perturbations") {
    StateVector w(g);
    for (int n = 0; n <= g.n1; ++n)
      for (int m = 0; m <= g.n2; ++m) w.at(g, n, FP, m) = Complex(0.3, 0.1 * n);
    const VectorXcd mw = ops.apply_m(embed_full(g, w));
    CHECK(mw.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("directional derivative of the residual matches A_U") {
    // travelling-wave-style dense pencil about a random state
    const StateVector base = random_state(g, 41, 0.2);
    const OperatorPair dops = assemble_linearization(g, cheb, p, base);
    CHECK(!dops.structured);
    const VectorXcd v0 = embed_full(g, base);
    const StateVector dw = random_state(g, 42, 1.0);
    const VectorXcd w = embed_full(g, dw);
    double prev = 0.0;
    for (int kk = 0; kk < 2; ++kk) {
      const double h = kk == 0 ? 1e-4 : 1e-5;
      const VectorXcd fd = (steady_residual(g, cheb, p, v0 + h * w) -
                            steady_residual(g, cheb, p, v0)) /
                           h;
      const double err = (fd - dops.apply_a(w)).cwiseAbs().maxCoeff();
      if (kk == 0)
        prev = err;
      else
        CHECK(err < 0.2 * prev);  // O(h) decay
    }
  }

  SUBCASE("boundary rows evaluate the wall values exactly") {
    for (int n = -g.n1; n <= g.n1; ++n) {
      const MatrixXcd& A = ops.a_blk[size_t(n + g.n1)];
      for (int f : {FU1, FU2}) {
        for (int s : {0, g.n2}) {
          if (n == 0 && f == FU2 && s == g.n2) continue;  // pressure tau row
          for (int m = 0; m <= g.n2; ++m) {
            const double want = (s == 0) ? 1.0 : ((m % 2 == 0) ? 1.0 : -1.0);
            CHECK(A(Eigen::Index(f) * g.cheb() + s,
                    Eigen::Index(f) * g.cheb() + m)
                      .real() == doctest::Approx(want));
          }
        }
      }
    }
  }
}

TEST_CASE("observables") {
  const ModeGrid g = newt_grid(1.3, 3, 24);
  const ChebMatrices cheb = cheb_matrices(g.n2);
  ModelParams p = newt_params();
  p.xhat2 = 0.0;

  SUBCASE("zero perturbation") {
    StateVector u(g);
    const ObsRecord ob = observables(g, cheb, p, u);
    CHECK(ob.e == 0.0);
    CHECK(ob.d == 0.0);
    CHECK(ob.mwnv == 0.0);
    CHECK(ob.svf == 0.0);
  }

  SUBCASE("single-mode energy matches pi/(2k)") {
    // u1 = sin(pi x2) cos(k x1)
    StateVector u(g);
    VectorXd vals(g.cheb());
    for (int s = 0; s <= g.n2; ++s) vals[s] = std::sin(M_PI * cheb.points[s]);
    const VectorXd coef = cheb.eval.partialPivLu().solve(vals);
    const double sk = g.fourier_norm();
    for (int m = 0; m <= g.n2; ++m) u.at(g, 1, FU1, m) = 0.5 * coef[m] / sk;
    const ObsRecord ob = observables(g, cheb, p, u);
    CHECK(ob.e == doctest::Approx(M_PI / (2.0 * g.k)).epsilon(1e-8));
  }

  SUBCASE("homogeneity of e and d") {
    const StateVector u = random_state(g, 55);
    StateVector u2 = u;
    u2.coeffs *= 2.0;
    const ObsRecord a = observables(g, cheb, p, u);
    const ObsRecord b = observables(g, cheb, p, u2);
    CHECK(b.e == doctest::Approx(4.0 * a.e).epsilon(1e-12));
    CHECK(b.d == doctest::Approx(2.0 * a.d).epsilon(1e-12));
  }
}

TEST_CASE("spectrum bound constants") {
  const ModeGrid g = newt_grid(1.02056, 2, 20);
  const ChebMatrices cheb = cheb_matrices(g.n2);
  const ModelParams p = newt_params(3600.0);

  SUBCASE("laminar parabola gives a=1.5, b=3, c=3") {
    const StateVector lam = laminar_state(g, cheb, p);
    const SpectrumBoundConstants sb = spectrum_bound_constants(g, cheb, lam);
    CHECK(sb.a == doctest::Approx(1.5).epsilon(1e-10));
    CHECK(sb.b == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(sb.c_const == doctest::Approx(3.0).epsilon(1e-10));
  }
  SUBCASE("zero base") {
    StateVector z(g);
    const SpectrumBoundConstants sb = spectrum_bound_constants(g, cheb, z);
    CHECK(sb.a == 0.0);
    CHECK(sb.b == 0.0);
    CHECK(sb.c_const == 0.0);
  }
  SUBCASE("constants shift only a") {
    const StateVector lam = laminar_state(g, cheb, p);
    StateVector sh = lam;
    sh.at(g, 0, FU1, 0) += 0.2 / g.fourier_norm();
    const SpectrumBoundConstants s0 = spectrum_bound_constants(g, cheb, lam);
    const SpectrumBoundConstants s1 = spectrum_bound_constants(g, cheb, sh);
    CHECK(s1.b == doctest::Approx(s0.b).epsilon(1e-12));
    CHECK(s1.c_const == doctest::Approx(s0.c_const).epsilon(1e-12));
    CHECK(s1.a > s0.a);
  }
}

TEST_CASE("divergence and boundary rows of converged states") {
  const ModeGrid g = newt_grid(1.02056, 2, 20);
  const ChebMatrices cheb = cheb_matrices(g.n2);
  const ModelParams p = newt_params(2000.0);
  const StateVector lam = laminar_state(g, cheb, p);
  const VectorXcd res =
      steady_residual(g, cheb, p, embed_full(g, lam), {/*phase_row=*/false});
  for (int n = -g.n1; n <= g.n1; ++n)
    for (int s = 1; s <= g.n2; ++s)  // s = 0 at n = 0 is the gauge row
      if (!(n == 0 && s == 0))
        CHECK(std::abs(res[g.full_index(n, FP, s)]) < 1e-11);
  const VectorXcd full = embed_full(g, lam);
  for (int n = -g.n1; n <= g.n1; ++n)
    for (int f : {FU1, FU2})
      for (int s : {0, g.n2}) {
        Complex wall = 0;
        for (int m = 0; m <= g.n2; ++m)
          wall += full[g.full_index(n, f, m)] * cheb.eval(s, m);
        CHECK(std::abs(wall) < 1e-12);
      }
}

TEST_SUITE_END();
