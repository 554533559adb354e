#pragma once

#include "ssmflow/ssm.hpp"

namespace ssmflow {

/// The reduced polynomial vector field theta' = R(theta) extracted from an
/// expansion table.
struct ReducedVectorField {
  int r = 0;
  int order = 0;
  std::map<MultiIndex, VectorXcd> coeffs;  // alpha -> R_{alpha} (length r)
};

ReducedVectorField reduced_field(const ExpansionTable& table);

/// Horner-free multivariate evaluation (term-by-term; desk-scale orders).
VectorXcd eval_R(const ReducedVectorField& field, const VectorXcd& theta);

/// Polar form of a conjugate-paired r = 2 field:
///   r' = a1 r + a3 r^3 + ...,  phi' = w0 + w2 r^2 + ...
/// Only the phase-equivariant monomials theta1^{k+1} conj(theta1)^k
/// contribute; the norm of everything else is reported as the equivariance
/// defect.
struct PolarForm {
  std::vector<double> radial;   // a1, a3, a5, ...
  std::vector<double> angular;  // w0, w2, w4, ...
  double equivariance_defect = 0.0;
};

PolarForm to_polar(const ReducedVectorField& field);

double radial_rate(const PolarForm& p, double r);       // r'
double angular_rate(const PolarForm& p, double r);      // phi'
double radial_rate_slope(const PolarForm& p, double r); // d(r')/dr

/// Positive roots of the radial polynomial in (0, r_max], bisection-refined.
std::vector<double> invariant_radii(const PolarForm& polar, double r_max);

struct Trajectory {
  std::vector<double> t;
  std::vector<VectorXcd> theta;
  bool escaped = false;  // step underflow near blow-up; samples are partial
};

/// Adaptive Dormand-Prince 5(4) integration with dense output at `nsamples`
/// uniformly spaced times.
Trajectory integrate(const ReducedVectorField& field, const VectorXcd& theta0,
                     double t0, double t1, int nsamples, double rtol = 1e-9,
                     double atol = 1e-11);

struct LiftedOrbit {
  std::vector<double> t;
  std::vector<StateVector> states;   // physical perturbation states
  std::vector<ObsRecord> obs;
  std::optional<double> frequency;   // w0 + w2 r^2 + ... on a constant radius
  ObsRecord mean;
};

/// Per-sample evaluation of the embedding plus observables; constant-radius
/// trajectories additionally report the lifted angular frequency.
LiftedOrbit lift_orbit(const ExpansionTable& table, const Trajectory& traj,
                       const ModeGrid& grid, const ChebMatrices& cheb,
                       const ModelParams& params,
                       const StateVector* base = nullptr);

}  // namespace ssmflow
