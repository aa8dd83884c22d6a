#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "eq/dynamics.hpp"
#include "eq/io.hpp"

namespace eq::cli {

/// Every problem found in a config, one "field: message" line each.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> diagnostics);
  const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

struct Range {
  double min = 0.0;
  double max = 0.0;
  int count = 1;
  std::vector<double> values() const;
};

struct FamilyConfig {
  bool present = false;
  FamilyKind kind = FamilyKind::canonical;
  int dim = 0;  // 0: chosen from the label ranges
  double beta = 2.0;
  double s = 1.0;
  double a = 0.0;
  double b = 0.0;
  std::optional<HalfLineGrid> grid;
};

struct ModelConfig {
  bool present = false;
  std::string kind = "oscillator";  // oscillator | hydrogen_classical | hydrogen_enhanced | spin_precession | operator
  double m = 1.0;
  double e2 = 1.0;
  double beta = 2.0;
  double B = 1.0;
};

struct IntegratorConfig {
  IntegratorKind method = IntegratorKind::dormand_prince;
  double tol = 1e-10;
  std::optional<double> duration;
  double sample_dt = 0.0;
  double q_floor = 1e-8;
  double leapfrog_dt = 1e-3;
  FlowOptions options() const;
};

struct TransformConfig {
  std::string kind = "rotation";  // identity | rotation | scaling
  double lambda = 2.0;
  CanonicalTransform build() const;
};

struct LimitConfig {
  std::string builder = "operator";  // operator | hydrogen_fixed_beta | hydrogen_beta_ratio
  std::vector<double> hbar_sequence;
  std::vector<Labels> points;
  double beta_ratio = 2.0;
};

struct ExperimentConfig {
  std::string experiment;  // expectation | metric | curvature | evolve | compare_hydrogen | transform_check | limit_study
  double hbar = 1.0;
  FamilyConfig family;
  std::optional<Range> p_range, q_range;
  std::string op;  // operator polynomial text
  ModelConfig model;
  std::optional<Labels> initial;
  IntegratorConfig integrator;
  TransformConfig transform;
  LimitConfig limit;
  std::string output_dir;
  std::string format = "csv";
  std::vector<std::string> suites;
  nlohmann::json raw;
};

/// Validates against the schema in docs/config.md; throws ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j, bool for_verify = false);
/// Reads and parses a JSON file; syntax errors become ConfigError with line/column.
ExperimentConfig load_config(const std::string& path, bool for_verify = false);

struct Check {
  std::string suite;
  std::string name;
  double measured = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct OutputFile {
  std::string name;
  std::string contents;
};

struct RunResult {
  std::vector<OutputFile> files;
  std::vector<Check> checks;
  bool all_passed() const;
};

RunResult run_experiment(const ExperimentConfig& config, const OutputHeader& header);
RunResult run_verify(const ExperimentConfig& config, const OutputHeader& header);

/// Exit codes: 0 success, 1 a check failed, 2 usage or config error,
/// 3 library error during the run, 4 output could not be written.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace eq::cli
