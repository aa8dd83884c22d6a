#include "eq/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#ifndef EQ_VERSION
#define EQ_VERSION "0.0.0"
#endif

namespace eq {

const char* version() { return EQ_VERSION; }

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw InvalidArgument("cannot parse number '" + text + "'");
  }
  return v;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string config_hash(const nlohmann::json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(config.dump())));
  return std::string("fnv1a64:") + buf;
}

std::string OutputHeader::csv_block() const {
  std::string s = "# eq " + std::string(version()) + "\n";
  s += "# config_hash: " + config_hash + "\n";
  if (!experiment.empty()) s += "# experiment: " + experiment + "\n";
  if (timestamp) s += "# generated: " + *timestamp + "\n";
  return s;
}

nlohmann::json OutputHeader::to_json() const {
  nlohmann::json j{{"library", "eq"}, {"version", version()}, {"config_hash", config_hash}};
  if (!experiment.empty()) j["experiment"] = experiment;
  if (timestamp) j["generated"] = *timestamp;
  return j;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const OutputHeader& header) {
  out << header.csv_block() << "t,p,q,H,event\n";
  for (const auto& s : traj.samples) {
    out << format_double(s.t) << ',' << format_double(s.p) << ',' << format_double(s.q) << ','
        << format_double(s.H) << ',' << to_string(s.event) << '\n';
  }
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

Trajectory read_trajectory_csv(std::istream& in) {
  Trajectory traj;
  std::string line;
  bool columns_seen = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!columns_seen) {
      if (line != "t,p,q,H,event") {
        throw InvalidArgument("trajectory csv: unexpected column row '" + line + "'");
      }
      columns_seen = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 5) {
      throw InvalidArgument("trajectory csv line " + std::to_string(lineno) + ": expected 5 fields");
    }
    Sample s{parse_double(f[0]), parse_double(f[1]), parse_double(f[2]), parse_double(f[3]),
             event_kind_from_string(f[4])};
    traj.samples.push_back(s);
    if (s.event != EventKind::none) traj.events.push_back({s.t, s.event, s.p, s.q});
  }
  if (!columns_seen) throw InvalidArgument("trajectory csv: missing column row");
  return traj;
}

namespace {

nlohmann::json num(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

double from_num(const nlohmann::json& j) {
  if (j.is_string()) return parse_double(j.get<std::string>());
  if (!j.is_number()) throw InvalidArgument("trajectory json: expected a number");
  return j.get<double>();
}

}  // namespace

nlohmann::json trajectory_to_json(const Trajectory& traj) {
  nlohmann::json t = nlohmann::json::array(), p = t, q = t, H = t, ev = t, events = t;
  for (const auto& s : traj.samples) {
    t.push_back(num(s.t));
    p.push_back(num(s.p));
    q.push_back(num(s.q));
    H.push_back(num(s.H));
    ev.push_back(to_string(s.event));
  }
  for (const auto& e : traj.events) {
    events.push_back({{"t", num(e.t)}, {"kind", to_string(e.kind)}, {"p", num(e.p)}, {"q", num(e.q)}});
  }
  return {{"t", t}, {"p", p}, {"q", q}, {"H", H}, {"event", ev}, {"events", events}};
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
  for (const char* key : {"t", "p", "q", "H", "event", "events"}) {
    if (!j.contains(key) || !j.at(key).is_array()) {
      throw InvalidArgument(std::string("trajectory json: missing array '") + key + "'");
    }
  }
  const std::size_t n = j.at("t").size();
  for (const char* key : {"p", "q", "H", "event"}) {
    if (j.at(key).size() != n) throw InvalidArgument("trajectory json: column lengths differ");
  }
  Trajectory traj;
  traj.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    traj.samples.push_back({from_num(j["t"][i]), from_num(j["p"][i]), from_num(j["q"][i]),
                            from_num(j["H"][i]),
                            event_kind_from_string(j["event"][i].get<std::string>())});
  }
  for (const auto& e : j.at("events")) {
    traj.events.push_back({from_num(e.at("t")), event_kind_from_string(e.at("kind").get<std::string>()),
                           from_num(e.at("p")), from_num(e.at("q"))});
  }
  return traj;
}

void write_metric_csv(std::ostream& out, const std::vector<MetricRow>& rows,
                      const OutputHeader& header) {
  std::vector<std::vector<double>> table;
  table.reserve(rows.size());
  for (const auto& r : rows) table.push_back({r.p, r.q, r.g.g_pp, r.g.g_pq, r.g.g_qq});
  write_table_csv(out, {"p", "q", "g_pp", "g_pq", "g_qq"}, table, header);
}

void write_table_csv(std::ostream& out, const std::vector<std::string>& columns,
                     const std::vector<std::vector<double>>& rows, const OutputHeader& header) {
  for (const auto& r : rows) {
    if (r.size() != columns.size()) {
      throw InvalidArgument("write_table_csv: row has " + std::to_string(r.size()) +
                            " values for " + std::to_string(columns.size()) + " columns");
    }
  }
  out << header.csv_block();
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << format_double(r[i]);
    out << '\n';
  }
}

}  // namespace eq
