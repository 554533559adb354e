#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "ssmflow/analysis.hpp"

namespace ssmflow {

enum class Task { laminar, spectrum, tw, cont, ssm, reduce, lift };

std::string to_string(Task t);

/// Declarative run configuration, parsed from a single strict-schema JSON
/// document. Unknown keys are rejected; validation reports every violation.
struct RunConfig {
  std::string model;  // "newtonian" | "oldroydb"
  ModeGrid grid;
  ModelParams params;
  Task task = Task::laminar;
  std::filesystem::path output_dir = "out";

  // spectrum
  std::optional<double> beta_split;
  int eig_count = 0;
  std::optional<Complex> shift;

  // tw / continue
  ContParam cont_param = ContParam::re;
  double seed_at = 0.0;
  double range_from = 0.0;
  double range_to = 0.0;
  double step0 = 0.0;  // 0: model default (10 in Re, 0.05 in Wi)
  int max_points = 400;
  bool tag_stability = false;
  std::vector<double> seed_amplitudes;

  // ssm / reduce / lift
  SsmConfig ssm;
  double gap_tol = 1e-4;
  std::optional<double> r_max;
  std::optional<double> lift_radius;
  std::vector<Complex> lift_theta0;
  double t0 = 0.0, t1 = 0.0;
  int samples = 201;
  double rtol = 1e-9, atol = 1e-11;

  int nx_physical = 128;

  std::string raw_json;  // echoed into the run manifest
};

RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::string& origin);

/// Executes the task pipeline, writes the artifacts and a machine-readable
/// manifest into output_dir, and returns the process exit status (0 on
/// success, the error category code otherwise).
int run(const RunConfig& config);

// --- serialization (lossless round-trip at 17 significant digits) ----------

void save_state_json(const std::filesystem::path& p, const ModeGrid& grid,
                     const ModelParams& params, const std::string& model,
                     const StateVector& st);
StateVector load_state_json(const std::filesystem::path& p, ModeGrid* grid_out,
                            ModelParams* params_out = nullptr,
                            std::string* model_out = nullptr);

void save_field_csv(const std::filesystem::path& p, const ModeGrid& grid,
                    const PhysicalField& f);

void save_spectrum_csv(const std::filesystem::path& p,
                       const std::vector<EigenPair>& eigs,
                       std::optional<double> beta_split);

void save_branch_csv(const std::filesystem::path& p, const Branch& br,
                     bool oldroydb);
Branch load_branch_csv(const std::filesystem::path& p);

void save_ssm_json(const std::filesystem::path& p, const ExpansionTable& table,
                   ParamStyle style);
ExpansionTable load_ssm_json(const std::filesystem::path& p,
                             ParamStyle* style_out = nullptr);

void save_orbit_csv(const std::filesystem::path& p, const Trajectory& traj,
                    const LiftedOrbit& orbit);

/// FNV-1a 64-bit hash of a file's bytes, hex-encoded.
std::string file_hash(const std::filesystem::path& p);

}  // namespace ssmflow
