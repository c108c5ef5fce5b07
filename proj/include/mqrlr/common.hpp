#pragma once

#include <stdexcept>
#include <string>

namespace mqrlr {

// Input data cannot support the requested operation: short series,
// degenerate covariates, malformed files, bad dimensions.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// The LP machinery could not certify a result (stall, factorization
// breakdown, failed optimality verification).
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, long iterations = 0, const std::string& stage = {})
      : std::runtime_error(compose(what, iterations, stage)),
        iterations_(iterations),
        stage_(stage) {}

  long iterations() const noexcept { return iterations_; }
  const std::string& stage() const noexcept { return stage_; }

 private:
  static std::string compose(const std::string& what, long it, const std::string& stage) {
    std::string s = what;
    if (!stage.empty()) s += " [stage=" + stage + "]";
    s += " [iterations=" + std::to_string(it) + "]";
    return s;
  }

  long iterations_;
  std::string stage_;
};

}  // namespace mqrlr
