#pragma once

#include <stdexcept>
#include <string>

namespace ssmflow {

// Error categories; the CLI maps them to process exit codes.
enum class ErrorCategory : int {
  config = 2,
  solver = 3,
  eigen = 4,
  resonance = 5,
  io = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory cat, const std::string& what)
      : std::runtime_error(what), cat_(cat) {}
  ErrorCategory category() const noexcept { return cat_; }
  int exit_code() const noexcept { return static_cast<int>(cat_); }

 private:
  ErrorCategory cat_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorCategory::config, w) {}
};
struct SolverError : Error {
  explicit SolverError(const std::string& w) : Error(ErrorCategory::solver, w) {}
};
struct EigenError : Error {
  explicit EigenError(const std::string& w) : Error(ErrorCategory::eigen, w) {}
};
struct ResonanceError : Error {
  explicit ResonanceError(const std::string& w) : Error(ErrorCategory::resonance, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorCategory::io, w) {}
};

}  // namespace ssmflow
