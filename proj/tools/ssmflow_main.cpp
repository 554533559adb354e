#include <CLI11.hpp>
#include <cstdlib>

#include "ssmflow/errors.hpp"
#include "ssmflow/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ssmflow: spectral submanifolds and travelling waves for 2D channel flows"};

  std::string config_path;
  std::string output_dir;
  int threads = 0;
  std::string log_level = "info";
  app.add_option("config", config_path, "run configuration (JSON)")->required();
  app.add_option("--output-dir", output_dir, "override the config output_dir");
  app.add_option("--threads", threads, "BLAS/LAPACK thread count");
  app.add_option("--log-level", log_level, "error|info|debug")
      ->check(CLI::IsMember({"error", "info", "debug"}));

  CLI11_PARSE(app, argc, argv);

  if (threads > 0) {
    // must land before the first BLAS call
    setenv("OPENBLAS_NUM_THREADS", std::to_string(threads).c_str(), 1);
    setenv("OMP_NUM_THREADS", std::to_string(threads).c_str(), 1);
  }

  try {
    ssmflow::RunConfig cfg = ssmflow::load_config(config_path);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (log_level != "error")
      std::fprintf(stderr, "[ssmflow] task %s -> %s\n",
                   ssmflow::to_string(cfg.task).c_str(),
                   cfg.output_dir.string().c_str());
    return ssmflow::run(cfg);
  } catch (const ssmflow::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
