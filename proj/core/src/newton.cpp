#include "ssmflow/newton.hpp"

#include <cmath>

#include "ssmflow/errors.hpp"
#include "ssmflow/linalg.hpp"

namespace ssmflow {

NewtonResult newton_solve(const NewtonProblem& problem, VectorXcd guess,
                          const NewtonOptions& opt) {
  NewtonResult r;
  r.x = std::move(guess);
  if (problem.project) problem.project(r.x);

  VectorXcd res;
  MatrixXcd jac;
  for (int it = 0; it <= opt.max_iter; ++it) {
    problem.eval(r.x, res, nullptr);
    r.residual_norm = res.cwiseAbs().maxCoeff();
    if (!std::isfinite(r.residual_norm)) return r;
    if (r.residual_norm < opt.tol) {
      r.converged = true;
      return r;
    }
    if (it == opt.max_iter) break;
    problem.eval(r.x, res, &jac);
    ZLU lu(std::move(jac));
    if (lu.rcond() == 0.0)
      throw SolverError("newton_solve: singular Jacobian");
    r.x -= lu.solve(res);
    if (problem.project) problem.project(r.x);
    ++r.iterations;
  }
  return r;
}

// Newton on the bordered system
//   F(u, p) = 0
//   Re<t_u, u - u_pred> + w_p t_p (p - p_pred) = 0
// solved as one extended LU per iteration. The extended matrix stays regular
// at folds and at branch-switching points where dF/du itself degenerates; on
// the conjugate-symmetric subspace the complex normalization row is real.
// Rows are equilibrated: collocation rows span many orders of magnitude.
CorrectorResult arclength_corrector(const ContinuationProblem& prob,
                                    const VectorXcd& u_pred, double p_pred,
                                    const VectorXcd& t_u, double t_p,
                                    double w_p, const NewtonOptions& nopt) {
  CorrectorResult out;
  out.u = u_pred;
  out.param = p_pred;
  const Eigen::Index n = u_pred.size();
  VectorXcd res, res_p, rp1, rp2;
  MatrixXcd jac;

  const double hp = 1e-6 * (1.0 + std::abs(p_pred));
  for (int it = 0; it < nopt.max_iter; ++it) {
    prob.eval(out.u, out.param, res, &jac);
    const double rn = res.cwiseAbs().maxCoeff();
    const double narc = (t_u.conjugate().dot(out.u - u_pred)).real() +
                        w_p * t_p * (out.param - p_pred);
    if (rn < nopt.tol && std::abs(narc) < nopt.tol * (1.0 + std::abs(p_pred))) {
      out.converged = true;
      return out;
    }
    prob.eval(out.u, out.param + hp, rp1, nullptr);
    prob.eval(out.u, out.param - hp, rp2, nullptr);
    res_p = (rp1 - rp2) / (2.0 * hp);

    MatrixXcd ext(n + 1, n + 1);
    ext.topLeftCorner(n, n) = jac;
    ext.col(n).head(n) = res_p;
    ext.row(n).head(n) = t_u.adjoint();
    ext(n, n) = w_p * t_p;
    VectorXcd rhs(n + 1);
    rhs.head(n) = -res;
    rhs[n] = -narc;
    for (Eigen::Index i = 0; i <= n; ++i) {
      const double s = ext.row(i).cwiseAbs().maxCoeff();
      if (s > 0) {
        ext.row(i) /= s;
        rhs[i] /= s;
      }
    }
    ZLU lu(std::move(ext));
    VectorXcd delta;
    try {
      delta = lu.solve(rhs);
    } catch (const SolverError&) {
      return out;  // exactly singular extended system: corrector failure
    }
    out.u += delta.head(n);
    out.param += delta[n].real();
    if (prob.project) prob.project(out.u);
    ++out.iterations;
    if (!std::isfinite(out.param)) return out;
  }
  prob.eval(out.u, out.param, res, nullptr);
  out.converged = res.cwiseAbs().maxCoeff() < nopt.tol;
  return out;
}

namespace {

double fold_refine(const ContinuationProblem& prob, const BranchPoint& a,
                   const BranchPoint& b, double w_p,
                   const ContinuationOptions& opt) {
  // Bisection in arclength between two points whose secant-tangent param
  // components change sign; stops when the parameter bracket is within
  // fold_rel_tol of the parameter magnitude.
  VectorXcd ua = a.u, ub = b.u;
  double pa = a.param, pb = b.param;
  double fa = a.tangent_param;

  for (int it = 0; it < 60; ++it) {
    if (std::abs(pb - pa) < opt.fold_rel_tol * std::max(1.0, std::abs(pa)))
      break;
    VectorXcd du = ub - ua;
    double dp = pb - pa;
    double ds = std::sqrt(du.squaredNorm() + w_p * dp * dp);
    if (ds == 0.0) break;
    const VectorXcd t_u = du / ds;
    const double t_p = dp / ds;
    const VectorXcd u_pred = 0.5 * (ua + ub);
    const double p_pred = 0.5 * (pa + pb);
    auto mid = arclength_corrector(prob, u_pred, p_pred, t_u, t_p, w_p,
                                   opt.newton);
    if (!mid.converged) break;
    // secant slope on the [a, mid] half
    const double slope = mid.param - pa;
    if ((slope > 0) == (fa > 0)) {
      ua = mid.u;
      pa = mid.param;
      fa = slope;
    } else {
      ub = mid.u;
      pb = mid.param;
    }
  }
  return 0.5 * (pa + pb);
}

}  // namespace

NewtonResult newton_at_param(const ContinuationProblem& problem,
                             const VectorXcd& guess, double param,
                             const NewtonOptions& opt) {
  NewtonProblem p;
  p.eval = [&](const VectorXcd& x, VectorXcd& res, MatrixXcd* jac) {
    problem.eval(x, param, res, jac);
  };
  p.project = problem.project;
  return newton_solve(p, guess, opt);
}

Branch continue_branch(const ContinuationProblem& problem,
                       const BranchPoint& start, int direction,
                       const ContinuationOptions& opt) {
  if (opt.param_max <= opt.param_min)
    throw ConfigError("continue_branch: empty parameter range");

  Branch br;
  br.points.push_back(start);

  const double step_min = opt.step_min_frac * opt.step0;
  double step = opt.step0;
  const double w = opt.w_param;

  // first tangent: natural parameter direction
  VectorXcd t_u = VectorXcd::Zero(start.u.size());
  double t_p = double(direction);

  while (int(br.points.size()) < opt.max_points) {
    const BranchPoint& cur = br.points.back();
    const VectorXcd u_pred = cur.u + step * t_u;
    const double p_pred = cur.param + step * t_p;

    auto c = arclength_corrector(problem, u_pred, p_pred, t_u, t_p, w,
                                 opt.newton);
    if (!c.converged) {
      step *= 0.5;
      if (step < step_min) {
        br.stalled = true;
        break;
      }
      continue;
    }

    BranchPoint np;
    np.u = c.u;
    np.param = c.param;
    if (problem.observe) np.obs = problem.observe(c.u, c.param);

    // secant tangent for the next prediction and for fold detection
    VectorXcd du = np.u - cur.u;
    double dp = np.param - cur.param;
    double ds = std::sqrt(du.squaredNorm() + w * dp * dp);
    if (ds == 0.0) {
      br.stalled = true;
      break;
    }
    t_u = du / ds;
    t_p = dp / ds;
    np.tangent_param = t_p;
    br.steps.push_back(ds);

    if (br.points.size() >= 2) {
      const double prev_tp = cur.tangent_param;
      if (prev_tp != 0.0 && (prev_tp > 0) != (t_p > 0))
        br.folds.push_back(fold_refine(problem, cur, np, w, opt));
    }
    br.points.push_back(std::move(np));

    if (c.iterations <= opt.grow_below_iters) step *= opt.grow;
    step = std::min(step, 10.0 * opt.step0);

    if (br.points.back().param < opt.param_min ||
        br.points.back().param > opt.param_max)
      break;
  }
  return br;
}

}  // namespace ssmflow
