#include "ssmflow/spectral.hpp"

#include <cmath>

#include "ssmflow/errors.hpp"
#include "ssmflow/state.hpp"

namespace ssmflow {

double ModeGrid::fourier_norm() const { return std::sqrt(k / (2.0 * M_PI)); }

void ModeGrid::validate() const {
  if (!(k > 0.0)) throw ConfigError("grid.k must be > 0");
  if (n1 < 1) throw ConfigError("grid.n1 must be >= 1");
  if (n2 < 4) throw ConfigError("grid.n2 must be >= 4");
  if (nfields != 3 && nfields != 6)
    throw ConfigError("grid.nfields must be 3 (Newtonian) or 6 (Oldroyd-B)");
}

VectorXd gauss_lobatto_points(int n2) {
  if (n2 < 1) throw ConfigError("degenerate grid: n2 must be >= 1");
  VectorXd x(n2 + 1);
  for (int s = 0; s <= n2; ++s) x[s] = std::cos(double(s) * M_PI / double(n2));
  // pin the endpoints exactly
  x[0] = 1.0;
  x[n2] = -1.0;
  if (n2 % 2 == 0) x[n2 / 2] = 0.0;
  return x;
}

namespace {

// T, T', T'' at one abscissa via the three-term recurrence.
void cheb_rows(int n2, double x, double* t, double* d, double* dd) {
  t[0] = 1.0;
  d[0] = 0.0;
  dd[0] = 0.0;
  if (n2 == 0) return;
  t[1] = x;
  d[1] = 1.0;
  dd[1] = 0.0;
  for (int m = 2; m <= n2; ++m) {
    t[m] = 2.0 * x * t[m - 1] - t[m - 2];
    d[m] = 2.0 * t[m - 1] + 2.0 * x * d[m - 1] - d[m - 2];
    dd[m] = 4.0 * d[m - 1] + 2.0 * x * dd[m - 1] - dd[m - 2];
  }
}

}  // namespace

MatrixXd cheb_eval_at(int n2, const VectorXd& x) {
  MatrixXd e(x.size(), n2 + 1);
  std::vector<double> t(n2 + 1), d(n2 + 1), dd(n2 + 1);
  for (Index s = 0; s < x.size(); ++s) {
    cheb_rows(n2, x[s], t.data(), d.data(), dd.data());
    for (int m = 0; m <= n2; ++m) e(s, m) = t[m];
  }
  return e;
}

MatrixXd cheb_deriv_at(int n2, const VectorXd& x) {
  MatrixXd e(x.size(), n2 + 1);
  std::vector<double> t(n2 + 1), d(n2 + 1), dd(n2 + 1);
  for (Index s = 0; s < x.size(); ++s) {
    cheb_rows(n2, x[s], t.data(), d.data(), dd.data());
    for (int m = 0; m <= n2; ++m) e(s, m) = d[m];
  }
  return e;
}

VectorXd clenshaw_curtis_weights(const ChebMatrices& cheb) {
  // w^T = mu^T E^{-1}: integrating the interpolant exactly.
  return cheb.eval.transpose().partialPivLu().solve(cheb.moments);
}

ChebMatrices cheb_matrices(int n2) {
  if (n2 < 1) throw ConfigError("degenerate grid: n2 must be >= 1");
  ChebMatrices c;
  c.points = gauss_lobatto_points(n2);
  c.eval.resize(n2 + 1, n2 + 1);
  c.d1.resize(n2 + 1, n2 + 1);
  c.d2.resize(n2 + 1, n2 + 1);
  std::vector<double> t(n2 + 1), d(n2 + 1), dd(n2 + 1);
  for (int s = 0; s <= n2; ++s) {
    cheb_rows(n2, c.points[s], t.data(), d.data(), dd.data());
    for (int m = 0; m <= n2; ++m) {
      c.eval(s, m) = t[m];
      c.d1(s, m) = d[m];
      c.d2(s, m) = dd[m];
    }
  }
  c.moments.resize(n2 + 1);
  for (int m = 0; m <= n2; ++m)
    c.moments[m] = (m % 2 == 0) ? 2.0 / (1.0 - double(m) * double(m)) : 0.0;
  c.weights = clenshaw_curtis_weights(c);
  return c;
}

PhysicalField to_physical(const ModeGrid& grid, const ChebMatrices& cheb,
                          const StateVector& state, int nx) {
  check_layout(grid, state);
  if (nx < 1) throw ConfigError("to_physical: nx must be >= 1");

  PhysicalField out;
  out.x1.resize(nx);
  const double period = 2.0 * M_PI / grid.k;
  for (int i = 0; i < nx; ++i) out.x1[i] = period * double(i) / double(nx);
  out.x2 = cheb.points;

  const double sk = grid.fourier_norm();
  const int nc = grid.cheb();
  out.fields.assign(grid.nfields, MatrixXd::Zero(nx, nc));

  for (int f = 0; f < grid.nfields; ++f) {
    // profile values at collocation points, per stored mode
    MatrixXcd prof(nc, grid.modes_half());
    for (int n = 0; n <= grid.n1; ++n)
      prof.col(n) =
          cheb.eval * state.coeffs.segment(grid.half_index(n, f, 0), nc);
    for (int i = 0; i < nx; ++i) {
      for (int s = 0; s < nc; ++s) {
        Complex acc = prof(s, 0);
        for (int n = 1; n <= grid.n1; ++n) {
          const Complex ph =
              std::polar(1.0, double(n) * grid.k * out.x1[i]);
          acc += 2.0 * (prof(s, n) * ph).real();
        }
        out.fields[f](i, s) = sk * acc.real();
      }
    }
  }
  return out;
}

}  // namespace ssmflow
