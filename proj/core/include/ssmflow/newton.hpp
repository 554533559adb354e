#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ssmflow/flow_models.hpp"

namespace ssmflow {

struct NewtonOptions {
  double tol = 1e-10;  // infinity norm of the residual
  int max_iter = 25;
};

struct NewtonResult {
  VectorXcd x;
  int iterations = 0;
  double residual_norm = 0.0;
  bool converged = false;
};

/// Residual/Jacobian callback; the Jacobian pointer is null on residual-only
/// evaluations. `project` (optional) re-imposes structural constraints after
/// each update (conjugate symmetry for flow states).
struct NewtonProblem {
  std::function<void(const VectorXcd&, VectorXcd&, MatrixXcd*)> eval;
  std::function<void(VectorXcd&)> project;
};

/// Plain Newton-Raphson with a dense LU per step. Throws SolverError on a
/// singular Jacobian; non-convergence is reported in the result so callers
/// can decide (continue_branch shrinks its step instead of failing).
NewtonResult newton_solve(const NewtonProblem& problem, VectorXcd guess,
                          const NewtonOptions& opt = {});

// --- pseudo-arclength continuation -----------------------------------------

struct ContinuationProblem {
  // residual and (optionally) Jacobian at (u, param)
  std::function<void(const VectorXcd&, double, VectorXcd&, MatrixXcd*)> eval;
  std::function<void(VectorXcd&)> project;
  // observables hook, evaluated at accepted points
  std::function<ObsRecord(const VectorXcd&, double)> observe;
};

struct BranchPoint {
  VectorXcd u;
  double param = 0.0;
  std::optional<ObsRecord> obs;
  std::optional<int> stability;  // count of eigenvalues with Re > 0
  double tangent_param = 0.0;    // param component of the unit secant tangent
};

struct Branch {
  std::vector<BranchPoint> points;
  std::vector<double> steps;        // accepted arclength steps
  std::vector<double> folds;        // localized fold parameter values
  bool stalled = false;             // step underflow; branch is partial
};

struct ContinuationOptions {
  double step0 = 10.0;
  double step_min_frac = 1e-4;  // step_min = step_min_frac * step0
  double grow = 1.3;
  int grow_below_iters = 3;
  double param_min = 0.0;
  double param_max = 0.0;
  int max_points = 500;
  double w_param = 1.0;  // arclength weight on the parameter component
  double fold_rel_tol = 1e-3;
  NewtonOptions newton;
};

/// Secant-predictor / bordered-corrector continuation. Traverses folds;
/// halves the step on corrector failure and grows it after fast successes;
/// stops when the parameter leaves [param_min, param_max], max_points is
/// reached, or the step underflows (partial branch returned, stalled flag).
Branch continue_branch(const ContinuationProblem& problem,
                       const BranchPoint& start, int direction,
                       const ContinuationOptions& opt);

/// Fixed-parameter Newton correction of a continuation state (used to land
/// exactly on a requested parameter value from a nearby branch point).
NewtonResult newton_at_param(const ContinuationProblem& problem,
                             const VectorXcd& guess, double param,
                             const NewtonOptions& opt = {});

struct CorrectorResult {
  VectorXcd u;
  double param = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// One bordered (pseudo-arclength) corrector solve: Newton on F(u, p) = 0
/// with the normalization Re<t_u, u - u_pred> + w_p t_p (p - p_pred) = 0.
/// Also the branch-switching tool: with t_p = 0 and t_u along a bifurcating
/// eigenvector, the amplitude is pinned while the parameter is free.
CorrectorResult arclength_corrector(const ContinuationProblem& problem,
                                    const VectorXcd& u_pred, double p_pred,
                                    const VectorXcd& t_u, double t_p,
                                    double w_p, const NewtonOptions& opt);

}  // namespace ssmflow
