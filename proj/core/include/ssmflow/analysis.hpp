#pragma once

#include "ssmflow/newton.hpp"
#include "ssmflow/reduced.hpp"
#include "ssmflow/ssm.hpp"

namespace ssmflow {

/// Shared immutable context for one model configuration.
struct FlowContext {
  ModeGrid grid;
  ChebMatrices cheb;
  ModelParams params;

  static FlowContext make(const ModeGrid& grid, const ModelParams& params);
};

enum class ContParam { re, wi };

/// Leading eigenvalue (largest real part) of the linearization about the
/// laminar state at the given parameters.
Complex leading_eigenvalue(const FlowContext& ctx);

/// Spectrum about the laminar state; structured per-block pencil.
std::vector<EigenPair> laminar_spectrum(const FlowContext& ctx, int count = 0);

/// Critical parameter value where the leading eigenvalue's real part crosses
/// zero, located by bisection over [lo, hi] to relative tolerance rel_tol.
double find_critical_param(FlowContext ctx, ContParam which, double lo,
                           double hi, double rel_tol = 1e-4);

/// Newton problem adapter for the travelling-wave system at fixed params.
NewtonProblem steady_problem(const FlowContext& ctx);

/// Continuation problem adapter in Re or Wi, with observables recorded
/// relative to the laminar state at the running parameter value.
/// `phase_row = false` selects the x1-independent variant (trivial c
/// equation) used to continue the laminar branch itself.
ContinuationProblem continuation_problem(FlowContext ctx, ContParam which,
                                         bool phase_row = true);

struct TwSeedOptions {
  std::vector<double> amplitudes = {1e-2, 3e-2, 1e-1, 3e-1};
  NewtonOptions newton{1e-10, 30};
  double nontrivial_e = 1e-10;   // perturbation energy that counts as a wave
};

struct TwSeedResult {
  StateVector state;   // converged travelling wave (absolute state)
  double param = 0.0;  // parameter the amplitude-pinned corrector landed on
  Complex lambda_crit; // leading eigenvalue at the seeding point
};

/// Branch switching at the laminar bifurcation: predicts laminar plus a
/// scaled critical eigenvector (phase speed Im(lambda)/k) and corrects with
/// the continuation parameter free and the amplitude along the eigenvector
/// pinned, so the corrector lands on the bifurcating travelling-wave branch
/// on whichever side it exists. `param_at` should be near the bifurcation.
TwSeedResult seed_travelling_wave(FlowContext ctx, ContParam which,
                                  double param_at, const TwSeedOptions& opt = {});

/// Stability tag: number of eigenvalues with positive real part of the
/// linearization about `base`.
int count_unstable(const FlowContext& ctx, const StateVector& base);

// --- SSM pipeline -----------------------------------------------------------

struct SsmData {
  StateVector base;
  OperatorPair ops;
  std::vector<EigenPair> spectrum;
  SpectralSplit split;
  ExpansionTable table;
};

BilinearFn bilinear_fn(const FlowContext& ctx);
EnergyFn energy_fn(const FlowContext& ctx);
DefectNormFn defect_norm_fn(const FlowContext& ctx);

/// laminar solve -> linearize -> eigensolve -> split -> expand.
SsmData ssm_about_laminar(const FlowContext& ctx, double beta_split,
                          const SsmConfig& config, double gap_tol = 1e-4);

/// Same pipeline about a supplied steady state (travelling wave).
SsmData ssm_about_state(const FlowContext& ctx, const StateVector& base,
                        double beta_split, const SsmConfig& config,
                        double gap_tol = 1e-4);

}  // namespace ssmflow
