#include <doctest.h>

#include <cmath>
#include <random>

#include "ssmflow/errors.hpp"
#include "ssmflow/spectral.hpp"
#include "ssmflow/state.hpp"

using namespace ssmflow;

TEST_SUITE_BEGIN("spectral");

TEST_CASE("gauss-lobatto points") {
  SUBCASE("n2=2") {
    const VectorXd x = gauss_lobatto_points(2);
    REQUIRE(x.size() == 3);
    CHECK(x[0] == 1.0);
    CHECK(x[1] == 0.0);
    CHECK(x[2] == -1.0);
  }
  SUBCASE("n2=4 exact cosines") {
    const VectorXd x = gauss_lobatto_points(4);
    CHECK(x[0] == 1.0);
    CHECK(x[1] == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-15));
    CHECK(x[2] == 0.0);
    CHECK(x[3] == doctest::Approx(-std::sqrt(2.0) / 2.0).epsilon(1e-15));
    CHECK(x[4] == -1.0);
  }
  SUBCASE("n2=3 hand-evaluated") {
    const VectorXd x = gauss_lobatto_points(3);
    CHECK(x[0] == doctest::Approx(1.0));
    CHECK(x[1] == doctest::Approx(0.5));
    CHECK(x[2] == doctest::Approx(-0.5));
    CHECK(x[3] == doctest::Approx(-1.0));
  }
  SUBCASE("monotone decreasing") {
    const VectorXd x = gauss_lobatto_points(17);
    for (int s = 1; s < x.size(); ++s) CHECK(x[s] < x[s - 1]);
  }
  SUBCASE("degenerate grid") {
    CHECK_THROWS_AS((void)gauss_lobatto_points(0), ConfigError);
  }
}

TEST_CASE("chebyshev tables") {
  const ChebMatrices c = cheb_matrices(8);
  SUBCASE("T_m(1) = 1 for all m") {
    for (int m = 0; m <= 8; ++m) CHECK(c.eval(0, m) == doctest::Approx(1.0));
  }
  SUBCASE("T_2(0.5) = -0.5") {
    const MatrixXd e = cheb_eval_at(4, (VectorXd(1) << 0.5).finished());
    CHECK(e(0, 2) == doctest::Approx(-0.5).epsilon(1e-15));
  }
  SUBCASE("d1 of x^2 at 0.5 equals 1") {
    // x^2 = (T0 + T2) / 2
    VectorXd coeffs = VectorXd::Zero(9);
    coeffs[0] = 0.5;
    coeffs[2] = 0.5;
    const MatrixXd d = cheb_deriv_at(8, (VectorXd(1) << 0.5).finished());
    CHECK((d * coeffs)(0) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("differentiation exact on polynomials up to n2") {
  const int n2 = 12;
  const ChebMatrices c = cheb_matrices(n2);
  // each monomial x^p, p <= n2, expanded in the Chebyshev basis by
  // interpolation, then differentiated through the d1 table
  for (int p = 0; p <= n2; ++p) {
    VectorXd vals(n2 + 1), dvals(n2 + 1);
    for (int s = 0; s <= n2; ++s) {
      vals[s] = std::pow(c.points[s], p);
      dvals[s] = p == 0 ? 0.0 : p * std::pow(c.points[s], p - 1);
    }
    const VectorXd coeffs = c.eval.partialPivLu().solve(vals);
    const VectorXd got = c.d1 * coeffs;
    for (int s = 0; s <= n2; ++s)
      CHECK(got[s] == doctest::Approx(dvals[s]).epsilon(1e-10));
  }
}

TEST_CASE("quadrature of 1 - x^2 equals 4/3") {
  for (int n2 : {4, 9, 16, 41}) {
    const ChebMatrices c = cheb_matrices(n2);
    double acc = 0.0;
    for (int s = 0; s <= n2; ++s)
      acc += c.weights[s] * (1.0 - c.points[s] * c.points[s]);
    CHECK(acc == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  }
}

namespace {

ModeGrid small_grid() {
  ModeGrid g;
  g.k = 1.1;
  g.n1 = 3;
  g.n2 = 6;
  g.nfields = 3;
  return g;
}

}  // namespace

TEST_CASE("to_physical") {
  const ModeGrid g = small_grid();
  const ChebMatrices c = cheb_matrices(g.n2);

  SUBCASE("zero coefficients give zero fields") {
    StateVector st(g);
    const PhysicalField f = to_physical(g, c, st, 16);
    for (const auto& fld : f.fields) CHECK(fld.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("single (0,0) mode is the constant sqrt(k/2pi)") {
    StateVector st(g);
    st.at(g, 0, FU1, 0) = 1.0;
    const PhysicalField f = to_physical(g, c, st, 7);
    for (Index i = 0; i < f.x1.size(); ++i)
      for (Index s = 0; s < f.x2.size(); ++s)
        CHECK(f.fields[FU1](i, s) ==
              doctest::Approx(g.fourier_norm()).epsilon(1e-14));
  }

  SUBCASE("round-trip refit recovers random coefficients") {
    std::mt19937 rng(7);
    std::normal_distribution<double> dist;
    StateVector st(g);
    for (Index i = 0; i < st.coeffs.size(); ++i)
      st.coeffs[i] = Complex(dist(rng), dist(rng));
    // n = 0 must be self-conjugate for a real field
    for (int f = 0; f < g.nfields; ++f)
      for (int m = 0; m <= g.n2; ++m)
        st.at(g, 0, f, m) = st.at(g, 0, f, m).real();

    const int nx = 4 * g.modes_full();
    const PhysicalField f = to_physical(g, c, st, nx);

    // least-squares refit oracle on the u1 field
    const int nmodes = g.modes_full();
    Eigen::MatrixXd design(nx, nmodes);
    for (int i = 0; i < nx; ++i) {
      design(i, 0) = 1.0;
      for (int n = 1; n <= g.n1; ++n) {
        design(i, 2 * n - 1) = 2.0 * std::cos(n * g.k * f.x1[i]);
        design(i, 2 * n) = -2.0 * std::sin(n * g.k * f.x1[i]);
      }
    }
    for (Index s = 0; s < f.x2.size(); ++s) {
      // per collocation point: fit profile-mode real/imag parts
      const VectorXd rhs = f.fields[FU1].col(s);
      const VectorXd sol = design.colPivHouseholderQr().solve(rhs);
      // reference profile values
      VectorXcd prof(g.modes_half());
      for (int n = 0; n <= g.n1; ++n) {
        Complex acc = 0;
        for (int m = 0; m <= g.n2; ++m)
          acc += st.at(g, 0 + n, FU1, m) * c.eval(s, m);
        prof[n] = g.fourier_norm() * acc;
      }
      CHECK(sol[0] == doctest::Approx(prof[0].real()).epsilon(1e-10));
      for (int n = 1; n <= g.n1; ++n) {
        CHECK(sol[2 * n - 1] == doctest::Approx(prof[n].real()).epsilon(1e-10));
        CHECK(sol[2 * n] == doctest::Approx(prof[n].imag()).epsilon(1e-10));
      }
    }
  }

  SUBCASE("reality: explicit complex sum has vanishing imaginary part") {
    std::mt19937 rng(11);
    std::normal_distribution<double> dist;
    StateVector st(g);
    for (Index i = 0; i < st.coeffs.size(); ++i)
      st.coeffs[i] = Complex(dist(rng), dist(rng));
    for (int f = 0; f < g.nfields; ++f)
      for (int m = 0; m <= g.n2; ++m)
        st.at(g, 0, f, m) = st.at(g, 0, f, m).real();

    const VectorXcd full = embed_full(g, st);
    const ChebMatrices cc = cheb_matrices(g.n2);
    std::uniform_real_distribution<double> ux(0.0, 2.0 * M_PI / g.k);
    for (int trial = 0; trial < 20; ++trial) {
      const double x1 = ux(rng);
      const int s = int(rng() % size_t(g.n2 + 1));
      Complex acc = 0;
      for (int n = -g.n1; n <= g.n1; ++n) {
        Complex prof = 0;
        for (int m = 0; m <= g.n2; ++m)
          prof += full[g.full_index(n, FU1, m)] * cc.eval(s, m);
        acc += g.fourier_norm() * prof * std::polar(1.0, n * g.k * x1);
      }
      CHECK(std::abs(acc.imag()) < 1e-13);
    }
  }
}

TEST_CASE("grid validation") {
  ModeGrid g = small_grid();
  g.nfields = 4;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g.nfields = 3;
  g.n2 = 3;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g.n2 = 6;
  CHECK_NOTHROW(g.validate());
}

TEST_SUITE_END();
