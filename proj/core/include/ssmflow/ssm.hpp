#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ssmflow/eigensolver.hpp"

namespace ssmflow {

/// Multi-index alpha over the r reduced coordinates; |alpha|_1 is the order
/// of the monomial theta^alpha it labels.
using MultiIndex = std::vector<int>;

int multi_order(const MultiIndex& a);

/// All alpha with |alpha|_1 = j, first component descending (the order the
/// examples enumerate); count = C(j + r - 1, r - 1).
std::vector<MultiIndex> enumerate_multiindices(int r, int j);

enum class ParamStyle { graph, normal_form, mixed };
enum class MonomialStyle { graph, normal_form };

struct SsmConfig {
  int order = 3;
  ParamStyle style = ParamStyle::mixed;
  double res_tol = 1e-2;     // near-resonance detection, relative
  double cross_tol = 1e-8;   // exact-hit tolerance for the cross-resonance error
  double err_tol = 1.5e-2;   // fundamental-domain tolerance
  double solve_residual_tol = 1e-9;
  double rcond_min = 1e-12;
};

enum class ResonanceType { none, internal, cross, near_cross };

struct ResonanceHit {
  MultiIndex alpha;
  ResonanceType type = ResonanceType::none;
  std::vector<int> matched_q;  // Sigma1 indices (internal)
  Complex matched{0.0, 0.0};
  double rel_dist = 0.0;
};

std::string to_string(ResonanceType t);

/// Classification of <alpha, vec(Sigma1)> against the two spectral subsets.
/// Internal takes precedence; cross requires an essentially exact hit (see
/// cross_tol), with near-misses within res_tol reported as near_cross.
ResonanceHit classify_resonance(const MultiIndex& alpha,
                                const SpectralSplit& split, double res_tol,
                                double cross_tol = 1e-8);

struct Monomial {
  VectorXcd K;  // embedding coefficient, length N
  VectorXcd R;  // reduced-dynamics coefficient, length r
  MonomialStyle style = MonomialStyle::normal_form;
};

using BilinearFn =
    std::function<VectorXcd(const VectorXcd&, const VectorXcd&)>;
using DefectNormFn = std::function<double(const VectorXcd&)>;

struct DefectModel {
  int j_lo = 0, j_hi = 0;
  std::map<MultiIndex, VectorXcd> eta;
};

/// Per-order, per-multi-index coefficient tables of the parameterization K
/// and the reduced dynamics R.
struct ExpansionTable {
  int r = 0;
  int order = 0;
  std::map<MultiIndex, Monomial> monomials;
  std::vector<ResonanceHit> resonance_log;

  const Monomial* find(const MultiIndex& a) const;
  /// Monomials of one homogeneous order.
  std::vector<const std::pair<const MultiIndex, Monomial>*> at_order(int j) const;

  mutable std::shared_ptr<const DefectModel> defect_cache;
};

/// eta_{j,alpha} for all |alpha| = j: the bilinear convolution of the lower
/// order embeddings plus the mass-weighted chain-rule term
/// M sum_{k=2}^{j-1} D K_{j-k+1}[R_k]. Orders absent from the table count as
/// zero, which also serves the truncation-defect evaluation beyond the
/// solved order.
std::map<MultiIndex, VectorXcd> compute_eta(const ExpansionTable& table, int j,
                                            const OperatorPair& ops,
                                            const BilinearFn& bilinear);

/// Solves the order-j coefficient equations
///   (A - <alpha,Lambda> M) K_{j,alpha} - M K_1 R_{j,alpha} = eta_{j,alpha}
/// per multi-index, with the style-dependent bordered constraints. Jordan
/// linear parts are handled by ordering the indices along the nilpotent
/// grading so the whole-order coupled system solves sequentially.
void solve_order(int j, const std::map<MultiIndex, VectorXcd>& eta,
                 const SpectralSplit& split, const OperatorPair& ops,
                 const SsmConfig& config, ExpansionTable& table);

/// Seeds (K_1, R_1) from the spectral split and runs solve_order up to
/// config.order.
ExpansionTable compute_expansion(const SpectralSplit& split,
                                 const OperatorPair& ops,
                                 const BilinearFn& bilinear,
                                 const SsmConfig& config);

/// K(theta) = sum K_{j,alpha} theta^alpha over the stored orders.
VectorXcd evaluate_K(const ExpansionTable& table, const VectorXcd& theta);

/// Truncation defect |sum_{j>L} eta_j(theta)| of the solved series at theta,
/// truncated at order 2L; `norm` defaults to the Euclidean norm.
double error_norm(const ExpansionTable& table, const VectorXcd& theta,
                  const OperatorPair& ops, const BilinearFn& bilinear,
                  const DefectNormFn& norm = {});

/// Largest radius (sampled over ray directions; r <= 2) with
/// err(theta) < err_tol.
double fundamental_radius(const ExpansionTable& table, const OperatorPair& ops,
                          const BilinearFn& bilinear, double err_tol,
                          int nangles = 8, const DefectNormFn& norm = {});

/// Rescales every Sigma1 right eigenvector by s (left by 1/s), preserving
/// biorthonormality. The anti-normalization hook of the scale-invariance
/// tests.
SpectralSplit rescale_eigenvectors(const SpectralSplit& split, double s);

}  // namespace ssmflow
