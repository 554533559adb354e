#include "ssmflow/reduced.hpp"

#include <boost/numeric/odeint.hpp>
#include <cmath>

#include "ssmflow/errors.hpp"
#include "ssmflow/state.hpp"

namespace ssmflow {

ReducedVectorField reduced_field(const ExpansionTable& table) {
  ReducedVectorField f;
  f.r = table.r;
  f.order = table.order;
  for (const auto& [a, mono] : table.monomials)
    if (mono.R.cwiseAbs().maxCoeff() > 0.0) f.coeffs.emplace(a, mono.R);
  return f;
}

VectorXcd eval_R(const ReducedVectorField& field, const VectorXcd& theta) {
  if (theta.size() != field.r)
    throw ConfigError("eval_R: theta dimension mismatch");
  VectorXcd out = VectorXcd::Zero(field.r);
  for (const auto& [a, coef] : field.coeffs) {
    Complex t = 1.0;
    for (size_t q = 0; q < a.size(); ++q)
      for (int p = 0; p < a[q]; ++p) t *= theta[Eigen::Index(q)];
    out += t * coef;
  }
  return out;
}

PolarForm to_polar(const ReducedVectorField& field) {
  if (field.r != 2)
    throw ConfigError("to_polar requires a 2-dimensional conjugate-paired field");
  PolarForm p;
  const int kmax = field.order / 2;  // monomials (k+1, k) up to the order
  p.radial.assign(size_t(kmax) + 1, 0.0);
  p.angular.assign(size_t(kmax) + 1, 0.0);
  double defect2 = 0.0;
  for (const auto& [a, coef] : field.coeffs) {
    // component 1: theta1^{k+1} conj^k contributes; component 2 mirrors it
    const bool eq1 = (a[0] - a[1] == 1);
    const bool eq2 = (a[1] - a[0] == 1);
    if (eq1) {
      const int k = a[1];
      if (k <= kmax) {
        p.radial[size_t(k)] += coef[0].real();
        p.angular[size_t(k)] += coef[0].imag();
      }
      defect2 += std::norm(coef[1]);
    } else if (eq2) {
      defect2 += std::norm(coef[0]);
    } else {
      defect2 += coef.squaredNorm();
    }
  }
  p.equivariance_defect = std::sqrt(defect2);
  return p;
}

double radial_rate(const PolarForm& p, double r) {
  double acc = 0.0, rp = r;
  for (double a : p.radial) {
    acc += a * rp;
    rp *= r * r;
  }
  return acc;
}

double angular_rate(const PolarForm& p, double r) {
  double acc = 0.0, rp = 1.0;
  for (double w : p.angular) {
    acc += w * rp;
    rp *= r * r;
  }
  return acc;
}

double radial_rate_slope(const PolarForm& p, double r) {
  double acc = 0.0, rp = 1.0;
  for (size_t k = 0; k < p.radial.size(); ++k) {
    acc += double(2 * k + 1) * p.radial[k] * rp;
    rp *= r * r;
  }
  return acc;
}

std::vector<double> invariant_radii(const PolarForm& polar, double r_max) {
  // roots of a1 + a3 s + a5 s^2 + ... in s = r^2
  std::vector<double> c(polar.radial);
  while (c.size() > 1 && c.back() == 0.0) c.pop_back();
  std::vector<double> out;
  if (c.size() < 2) return out;

  const Eigen::Index d = Eigen::Index(c.size()) - 1;
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i + 1 < d; ++i) comp(i + 1, i) = 1.0;
  for (Eigen::Index i = 0; i < d; ++i)
    comp(i, d - 1) = -c[size_t(i)] / c.back();
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp);

  auto poly = [&](double s) {
    double acc = 0.0, sp = 1.0;
    for (double ck : c) {
      acc += ck * sp;
      sp *= s;
    }
    return acc;
  };

  for (Eigen::Index i = 0; i < d; ++i) {
    const Complex z = es.eigenvalues()[i];
    if (std::abs(z.imag()) > 1e-8 * (1.0 + std::abs(z.real()))) continue;
    double s = z.real();
    if (!(s > 0.0)) continue;
    // bisection polish
    double w = 1e-3 * std::max(s, 1e-30);
    double lo = std::max(s - w, 0.0), hi = s + w;
    int expand = 0;
    while (poly(lo) * poly(hi) > 0.0 && expand++ < 40) {
      w *= 2.0;
      lo = std::max(s - w, 0.0);
      hi = s + w;
    }
    if (poly(lo) * poly(hi) <= 0.0) {
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (hi - lo < 1e-12 * std::max(1.0, std::abs(mid))) break;
        if (poly(lo) * poly(mid) <= 0.0)
          hi = mid;
        else
          lo = mid;
      }
      s = 0.5 * (lo + hi);
    }
    const double r = std::sqrt(s);
    if (r > 0.0 && r <= r_max) out.push_back(r);
  }
  std::sort(out.begin(), out.end());
  // dedupe near-coincident roots
  out.erase(std::unique(out.begin(), out.end(),
                        [](double a, double b) {
                          return std::abs(a - b) <= 1e-9 * std::max(a, b);
                        }),
            out.end());
  return out;
}

Trajectory integrate(const ReducedVectorField& field, const VectorXcd& theta0,
                     double t0, double t1, int nsamples, double rtol,
                     double atol) {
  if (nsamples < 2) throw ConfigError("integrate: nsamples must be >= 2");
  if (theta0.size() != field.r)
    throw ConfigError("integrate: theta0 dimension mismatch");

  using state_t = std::vector<double>;  // re/im interleaved
  auto pack = [&](const VectorXcd& th) {
    state_t s(size_t(2 * field.r));
    for (int q = 0; q < field.r; ++q) {
      s[size_t(2 * q)] = th[q].real();
      s[size_t(2 * q) + 1] = th[q].imag();
    }
    return s;
  };
  auto unpack = [&](const state_t& s) {
    VectorXcd th(field.r);
    for (int q = 0; q < field.r; ++q)
      th[q] = Complex(s[size_t(2 * q)], s[size_t(2 * q) + 1]);
    return th;
  };

  const double blowup = 1e6 * (1.0 + theta0.norm());
  auto rhs = [&](const state_t& s, state_t& dsdt, double) {
    const VectorXcd th = unpack(s);
    const VectorXcd d = eval_R(field, th);
    for (int q = 0; q < field.r; ++q) {
      dsdt[size_t(2 * q)] = d[q].real();
      dsdt[size_t(2 * q) + 1] = d[q].imag();
    }
  };

  std::vector<double> times(size_t(nsamples), 0.0);
  for (int i = 0; i < nsamples; ++i)
    times[size_t(i)] = t0 + (t1 - t0) * double(i) / double(nsamples - 1);

  Trajectory traj;
  namespace ode = boost::numeric::odeint;
  auto stepper = ode::make_dense_output(
      atol, rtol, ode::runge_kutta_dopri5<state_t>());

  struct Escape {};
  state_t x0 = pack(theta0);
  try {
    ode::integrate_times(
        stepper, rhs, x0, times.begin(), times.end(),
        (t1 - t0) / 1000.0, [&](const state_t& s, double t) {
          const VectorXcd th = unpack(s);
          if (!th.allFinite() || th.norm() > blowup) throw Escape{};
          traj.t.push_back(t);
          traj.theta.push_back(th);
        });
  } catch (const Escape&) {
    traj.escaped = true;
  } catch (const std::runtime_error&) {
    traj.escaped = true;  // odeint step-size underflow
  }
  return traj;
}

LiftedOrbit lift_orbit(const ExpansionTable& table, const Trajectory& traj,
                       const ModeGrid& grid, const ChebMatrices& cheb,
                       const ModelParams& params, const StateVector* base) {
  LiftedOrbit out;
  out.t = traj.t;
  double e = 0, d = 0, mw = 0, sv = 0;
  for (const auto& th : traj.theta) {
    const VectorXcd full = evaluate_K(table, th);
    StateVector st = extract_half(grid, full);
    out.obs.push_back(observables(grid, cheb, params, st, base));
    out.states.push_back(std::move(st));
    e += out.obs.back().e;
    d += out.obs.back().d;
    mw += out.obs.back().mwnv;
    sv += out.obs.back().svf;
  }
  const double n = std::max<double>(1.0, double(out.obs.size()));
  out.mean.e = e / n;
  out.mean.d = d / n;
  out.mean.mwnv = mw / n;
  out.mean.svf = sv / n;

  if (table.r == 2 && !traj.theta.empty()) {
    double rmin = 1e300, rmax = 0.0;
    for (const auto& th : traj.theta) {
      const double r = std::abs(th[0]);
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
    }
    if (rmax > 0 && (rmax - rmin) <= 1e-6 * rmax) {
      const PolarForm p = to_polar(reduced_field(table));
      out.frequency = angular_rate(p, 0.5 * (rmin + rmax));
    }
  }
  return out;
}

}  // namespace ssmflow
