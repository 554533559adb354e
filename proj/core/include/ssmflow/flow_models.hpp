#pragma once

#include <optional>
#include <vector>

#include "ssmflow/linalg.hpp"
#include "ssmflow/spectral.hpp"
#include "ssmflow/state.hpp"

namespace ssmflow {

/// Physical parameters. `re` is the Reynolds number in the volume-flux
/// convention Re = Q / nu; the Weissenberg number, viscosity ratio and stress
/// diffusion apply to the Oldroyd-B model only. `xhat2` is the probe height
/// of the svf observable.
struct ModelParams {
  double re = 0.0;
  double wi = 0.0;
  double beta_visc = 1.0;
  double eps = 0.0;
  double xhat2 = 0.0;

  void validate(int nfields) const;
};

/// Linearization pencil (A_U, M) about a base state, with boundary rows
/// replaced, the flux row, the phase row (or its trivial stand-in for
/// streamwise-independent bases) and the columns for f and c embedded.
///
/// For streamwise-independent bases the pencil block-decouples across Fourier
/// modes and is stored per block (`structured`); block n = 0 carries the two
/// auxiliary slots. Otherwise dense storage is used.
struct OperatorPair {
  ModeGrid grid;
  bool structured = false;

  // structured storage: blocks n = -n1..n1 (index n + n1)
  std::vector<MatrixXcd> a_blk;
  std::vector<MatrixXcd> m_blk;

  // dense storage
  MatrixXcd a;
  MatrixXcd m;

  OperatorPair() = default;
  /// Dense pencil without grid structure (toy problems, tests).
  OperatorPair(MatrixXcd a_in, MatrixXcd m_in);

  Eigen::Index dim() const { return dim_; }
  Eigen::Index block_rows(int n) const;
  /// Gathers the block-n slice of a full-space vector (block 0 includes the
  /// two auxiliary slots at its tail).
  VectorXcd gather(const VectorXcd& x, int n) const;
  void scatter(const VectorXcd& xb, int n, VectorXcd& x) const;

  VectorXcd apply_a(const VectorXcd& x) const;
  VectorXcd apply_m(const VectorXcd& x) const;
  VectorXcd apply_a_adj(const VectorXcd& x) const;
  VectorXcd apply_m_adj(const VectorXcd& x) const;
  /// Dense materialization of the structured form (tests, small pencils).
  MatrixXcd a_dense() const;
  MatrixXcd m_dense() const;

  Eigen::Index dim_ = 0;
};

/// Bordered factorization of (A - sigma M) with optional border columns/rows:
///   [ A - sigma M   cols ] [x ]   [rhs]
///   [ rows^H         0   ] [mu] = [con].
/// Used both for the eigensolver's shift-invert operator (no borders) and the
/// per-monomial SSM solves (borders carry the Fredholm constraints).
class ShiftedFactor {
 public:
  ShiftedFactor(const OperatorPair& ops, Complex sigma,
                const MatrixXcd& cols = MatrixXcd(),
                const MatrixXcd& rows = MatrixXcd());

  VectorXcd solve(const VectorXcd& rhs, const VectorXcd& con = VectorXcd(),
                  VectorXcd* mu = nullptr) const;
  /// (A - sigma M)^H x = rhs; plain factorization only.
  VectorXcd solve_adjoint(const VectorXcd& rhs) const;
  double rcond_min() const;

 private:
  const OperatorPair* ops_;
  Eigen::Index nb_ = 0;
  std::vector<std::unique_ptr<ZLU>> blk_;   // structured path, per block
  std::vector<Eigen::VectorXd> blk_rs_;     // row equilibration scales
  std::vector<std::vector<int>> bcol_idx_;  // border columns attached per block
  std::unique_ptr<ZLU> dense_;              // dense path
  Eigen::VectorXd dense_rs_;
};

// --- assembly -------------------------------------------------------------

struct AssemblyOptions {
  bool phase_row = true;  // travelling-wave phase condition; laminar solves
                          // replace it by the trivial equation c = 0
};

struct SteadySystem {
  VectorXcd residual;
  MatrixXcd jacobian;
};

/// Residual and dense Jacobian of the steady (travelling-wave) system in the
/// complexified full-mode layout: momentum/continuity (and stress) rows at
/// the collocation points, Dirichlet rows at the walls, the n = 0 pressure
/// gauge row, the volume-flux row and the phase row; the Jacobian carries the
/// d/df and d/dc columns.
SteadySystem assemble_steady(const ModeGrid& grid, const ChebMatrices& cheb,
                             const ModelParams& params, const VectorXcd& v_full,
                             const AssemblyOptions& opt = {});
VectorXcd steady_residual(const ModeGrid& grid, const ChebMatrices& cheb,
                          const ModelParams& params, const VectorXcd& v_full,
                          const AssemblyOptions& opt = {});

/// Quadratic (bilinear) part of the equations at the collocation points,
/// truncated to |n| <= n1: advection of y by x, and for Oldroyd-B also the
/// transport and stretching of the stress of y by the velocity of x.
VectorXcd apply_bilinear(const ModeGrid& grid, const ChebMatrices& cheb,
                         const ModelParams& params, const VectorXcd& x_full,
                         const VectorXcd& y_full);
VectorXcd apply_bilinear(const ModeGrid& grid, const ChebMatrices& cheb,
                         const ModelParams& params, const StateVector& x,
                         const StateVector& y);

/// The x1-independent steady solution with unit volume flux and no-slip
/// walls (plus the consistent base stress for Oldroyd-B).
StateVector laminar_state(const ModeGrid& grid, const ChebMatrices& cheb,
                          const ModelParams& params);

/// Linearization about a converged steady state. Structured (per-block)
/// storage when the base is streamwise independent.
OperatorPair assemble_linearization(const ModeGrid& grid,
                                    const ChebMatrices& cheb,
                                    const ModelParams& params,
                                    const StateVector& base);

// --- observables ----------------------------------------------------------

struct ObsRecord {
  double e = 0.0;     // perturbation kinetic energy
  double d = 0.0;     // square-root dissipation ||u||_V
  double mwnv = 0.0;  // mean wall-normal velocity at x1 = 0
  double svf = 0.0;   // streamwise velocity fluctuation at (0, xhat2)
  std::optional<double> t_ratio;  // relative elastic energy (Oldroyd-B)
};

/// Observables of a perturbation state; `base` supplies the reference stress
/// for the Oldroyd-B elastic-energy ratio.
ObsRecord observables(const ModeGrid& grid, const ChebMatrices& cheb,
                      const ModelParams& params, const StateVector& u,
                      const StateVector* base = nullptr);

/// Discrete energy e = 0.5 ||u||^2_{L2} of the velocity part of a full-space
/// vector (quadrature-exact). Used to normalize eigenvectors.
double energy_of_full(const ModeGrid& grid, const ChebMatrices& cheb,
                      const VectorXcd& full);

/// Quadrature-weighted L2 norm over all field rows of a residual-space
/// vector; the error norm of the SSM invariance defect.
double defect_norm(const ModeGrid& grid, const ChebMatrices& cheb,
                   const VectorXcd& resid_full);

// --- Theorem-2.1-style spectrum envelope ------------------------------------

struct SpectrumBoundConstants {
  double a = 0.0;        // max |U|
  double b = 0.0;        // max |curl U|
  double c_const = 0.0;  // max Frobenius norm of grad U
};

/// Maxima over a >=4x oversampled physical grid of the base velocity.
SpectrumBoundConstants spectrum_bound_constants(const ModeGrid& grid,
                                                const ChebMatrices& cheb,
                                                const StateVector& base);

/// |Im lambda| <= a sqrt((-Re lambda + c) Re) + b, with relative slack.
/// Meaningful for the Newtonian operator; degenerate at Re = 0.
bool spectrum_envelope_holds(const SpectrumBoundConstants& sb, double re,
                             Complex lambda, double slack = 0.05);

}  // namespace ssmflow
