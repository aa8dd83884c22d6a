#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eq/coherent.hpp"
#include "eq/dynamics.hpp"

namespace eq {

/// Library version string, e.g. "0.1.0".
const char* version();

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
/// Inverse of format_double (also accepts "nan", "inf", "-inf").
double parse_double(const std::string& text);

std::uint64_t fnv1a64(const std::string& bytes);
/// "fnv1a64:" + 16 hex digits of the compact, key-sorted JSON dump.
std::string config_hash(const nlohmann::json& config);

/// Leading block of every output file.
struct OutputHeader {
  std::string config_hash;
  std::string experiment;
  std::optional<std::string> timestamp;  // only with --stamp

  /// "# key: value" lines.
  std::string csv_block() const;
  nlohmann::json to_json() const;
};

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const OutputHeader& header);
/// Skips '#' lines; expects the `t,p,q,H,event` column row.
Trajectory read_trajectory_csv(std::istream& in);

/// Columnar form {t:[], p:[], q:[], H:[], event:[], events:[{t,kind,p,q}]}.
/// Non-finite values are stored as strings so the round trip stays exact.
nlohmann::json trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const nlohmann::json& j);

struct MetricRow {
  double p = 0.0;
  double q = 0.0;
  Metric2 g;
};
void write_metric_csv(std::ostream& out, const std::vector<MetricRow>& rows,
                      const OutputHeader& header);

/// Generic table writer: header block, column row, then rows of doubles.
void write_table_csv(std::ostream& out, const std::vector<std::string>& columns,
                     const std::vector<std::vector<double>>& rows, const OutputHeader& header);

}  // namespace eq
