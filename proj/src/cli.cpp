#include "eq/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "eq/models.hpp"

namespace eq::cli {

using nlohmann::json;

ConfigError::ConfigError(std::vector<std::string> diagnostics)
    : std::runtime_error(diagnostics.empty() ? "invalid config" : diagnostics.front()),
      diagnostics_(std::move(diagnostics)) {}

std::vector<double> Range::values() const {
  std::vector<double> v;
  if (count == 1) return {min};
  for (int i = 0; i < count; ++i) {
    v.push_back(i == count - 1 ? max : min + (max - min) * i / (count - 1));
  }
  return v;
}

FlowOptions IntegratorConfig::options() const {
  FlowOptions o;
  o.integrator = method;
  o.tol = tol;
  o.sample_dt = sample_dt;
  o.q_floor = q_floor;
  o.leapfrog_dt = leapfrog_dt;
  return o;
}

CanonicalTransform TransformConfig::build() const {
  if (kind == "identity") return identity_transform();
  if (kind == "rotation") return rotation_transform();
  return scaling_transform(lambda);
}

bool RunResult::all_passed() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// config parsing

namespace {

const std::set<std::string> kExperiments = {"expectation",      "metric",          "curvature",
                                            "evolve",           "compare_hydrogen", "transform_check",
                                            "limit_study"};
const std::set<std::string> kSuites = {"fiducial_moments",       "curvature",       "metric",
                                       "energy_drift",           "canonical_means", "hydrogen_contrast",
                                       "transform_equivariance", "action_stationarity"};
const std::set<std::string> kModels = {"oscillator", "hydrogen_classical", "hydrogen_enhanced",
                                       "spin_precession", "operator"};

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

class Reader {
 public:
  std::vector<std::string> errors;

  void fail(const std::string& path, const std::string& msg) { errors.push_back(path + ": " + msg); }

  bool is_object(const json& j, const std::string& path) {
    if (j.is_object()) return true;
    fail(path, "must be an object");
    return false;
  }

  void known(const json& obj, const std::string& path, const std::set<std::string>& keys) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!keys.count(it.key())) fail(join(path, it.key()), "unknown field");
    }
  }

  std::optional<double> number(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj.at(key);
    if (!v.is_number()) {
      fail(join(path, key), "must be a number");
      return std::nullopt;
    }
    return v.get<double>();
  }

  std::optional<int> integer(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj.at(key);
    if (v.is_number_integer()) return v.get<int>();
    if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>()) {
      return static_cast<int>(v.get<double>());
    }
    fail(join(path, key), "must be an integer");
    return std::nullopt;
  }

  std::optional<std::string> string(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj.at(key);
    if (!v.is_string()) {
      fail(join(path, key), "must be a string");
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  void require(bool ok, const std::string& path, const std::string& msg) {
    if (!ok) fail(path, msg);
  }
};

std::optional<Range> parse_range(Reader& r, const json& labels, const char* key) {
  if (!labels.contains(key)) return std::nullopt;
  const std::string path = join("labels", key);
  const json& j = labels.at(key);
  if (!r.is_object(j, path)) return std::nullopt;
  r.known(j, path, {"min", "max", "count"});
  const auto lo = r.number(j, path, "min");
  const auto hi = r.number(j, path, "max");
  const auto n = r.integer(j, path, "count");
  if (!lo) r.fail(join(path, "min"), "required");
  if (!hi) r.fail(join(path, "max"), "required");
  if (!n) r.fail(join(path, "count"), "required");
  if (!lo || !hi || !n) return std::nullopt;
  bool ok = true;
  if (*n < 1) {
    r.fail(join(path, "count"), "must be >= 1 (empty label range)");
    ok = false;
  }
  if (*lo > *hi) {
    r.fail(path, "empty label range: min > max");
    ok = false;
  } else if (*n > 1 && *lo == *hi) {
    r.fail(path, "empty label range: count > 1 needs max > min");
    ok = false;
  }
  if (*n > 10000) {
    r.fail(join(path, "count"), "must be <= 10000");
    ok = false;
  }
  if (!ok) return std::nullopt;
  return Range{*lo, *hi, *n};
}

void parse_family(Reader& r, const json& j, ExperimentConfig& c) {
  const std::string path = "family";
  if (!r.is_object(j, path)) return;
  r.known(j, path, {"kind", "dim", "beta", "s", "a", "b", "grid"});
  c.family.present = true;
  if (const auto k = r.string(j, path, "kind")) {
    try {
      c.family.kind = family_kind_from_string(*k);
    } catch (const Error&) {
      r.fail("family.kind", "unknown family '" + *k + "' (canonical, affine, spin, extended)");
    }
  } else {
    r.fail("family.kind", "required");
  }
  if (const auto v = r.integer(j, path, "dim")) {
    r.require(*v >= 2 && *v <= 20000, "family.dim", "must be in [2, 20000]");
    c.family.dim = *v;
  }
  if (const auto v = r.number(j, path, "beta")) c.family.beta = *v;
  if (const auto v = r.number(j, path, "s")) c.family.s = *v;
  if (const auto v = r.number(j, path, "a")) c.family.a = *v;
  if (const auto v = r.number(j, path, "b")) c.family.b = *v;
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    if (r.is_object(g, "family.grid")) {
      r.known(g, "family.grid", {"x_min", "x_max", "n"});
      const auto lo = r.number(g, "family.grid", "x_min");
      const auto hi = r.number(g, "family.grid", "x_max");
      const auto n = r.integer(g, "family.grid", "n");
      if (lo && hi && n) {
        r.require(*lo > 0.0, "family.grid.x_min", "must be > 0");
        r.require(*hi > *lo, "family.grid.x_max", "must exceed x_min");
        r.require(*n >= 16 && *n <= 20000, "family.grid.n", "must be in [16, 20000]");
        c.family.grid = HalfLineGrid{*lo, *hi, *n};
      } else {
        r.fail("family.grid", "needs x_min, x_max and n");
      }
    }
  }
  r.require(c.family.beta > 0.0, "family.beta", "must be > 0");
  if (c.family.kind == FamilyKind::spin) {
    const double two_s = 2.0 * c.family.s;
    r.require(two_s >= 1.0 && std::floor(two_s) == two_s && two_s <= 2000, "family.s",
              "must be a positive multiple of 1/2 (<= 1000)");
  }
}

void parse_model(Reader& r, const json& j, ExperimentConfig& c) {
  if (!r.is_object(j, "model")) return;
  r.known(j, "model", {"kind", "m", "e2", "beta", "B"});
  c.model.present = true;
  if (const auto k = r.string(j, "model", "kind")) {
    if (kModels.count(*k)) {
      c.model.kind = *k;
    } else {
      r.fail("model.kind", "unknown model '" + *k + "'");
    }
  }
  if (const auto v = r.number(j, "model", "m")) c.model.m = *v;
  if (const auto v = r.number(j, "model", "e2")) c.model.e2 = *v;
  if (const auto v = r.number(j, "model", "beta")) c.model.beta = *v;
  if (const auto v = r.number(j, "model", "B")) c.model.B = *v;
  r.require(c.model.m > 0.0, "model.m", "must be > 0");
  r.require(c.model.e2 > 0.0, "model.e2", "must be > 0");
  if (c.model.kind == "hydrogen_enhanced") {
    r.require(c.model.beta > c.hbar, "model.beta", "must exceed hbar (C2 diverges otherwise)");
  }
}

void parse_integrator(Reader& r, const json& j, ExperimentConfig& c) {
  const std::string path = "integrator";
  if (!r.is_object(j, path)) return;
  r.known(j, path, {"method", "tol", "duration", "sample_dt", "q_floor", "leapfrog_dt"});
  auto& ic = c.integrator;
  if (const auto m = r.string(j, path, "method")) {
    if (*m == "dormand_prince") {
      ic.method = IntegratorKind::dormand_prince;
    } else if (*m == "leapfrog") {
      ic.method = IntegratorKind::leapfrog;
    } else {
      r.fail("integrator.method", "must be 'dormand_prince' or 'leapfrog'");
    }
  }
  if (const auto v = r.number(j, path, "tol")) {
    r.require(*v >= 1e-14 && *v <= 1e-2, "integrator.tol", "must be in [1e-14, 1e-2]");
    ic.tol = *v;
  }
  if (const auto v = r.number(j, path, "duration")) {
    r.require(*v > 0.0 && *v <= 1e6, "integrator.duration", "must be in (0, 1e6]");
    ic.duration = *v;
  }
  if (const auto v = r.number(j, path, "sample_dt")) {
    r.require(*v >= 0.0, "integrator.sample_dt", "must be >= 0");
    ic.sample_dt = *v;
  }
  if (const auto v = r.number(j, path, "q_floor")) {
    r.require(*v > 0.0, "integrator.q_floor", "must be > 0");
    ic.q_floor = *v;
  }
  if (const auto v = r.number(j, path, "leapfrog_dt")) {
    r.require(*v > 0.0, "integrator.leapfrog_dt", "must be > 0");
    ic.leapfrog_dt = *v;
  }
  if (ic.duration && ic.sample_dt > 0.0) {
    r.require(*ic.duration / ic.sample_dt <= 1e7, "integrator.sample_dt",
              "too small for the duration (more than 1e7 samples)");
  }
}

void parse_limit(Reader& r, const json& j, ExperimentConfig& c) {
  if (!r.is_object(j, "limit")) return;
  r.known(j, "limit", {"builder", "hbar_sequence", "points", "beta_ratio"});
  if (const auto b = r.string(j, "limit", "builder")) {
    if (*b == "operator" || *b == "hydrogen_fixed_beta" || *b == "hydrogen_beta_ratio") {
      c.limit.builder = *b;
    } else {
      r.fail("limit.builder", "must be operator, hydrogen_fixed_beta or hydrogen_beta_ratio");
    }
  }
  if (const auto v = r.number(j, "limit", "beta_ratio")) {
    r.require(*v > 1.0, "limit.beta_ratio", "must exceed 1");
    c.limit.beta_ratio = *v;
  }
  if (j.contains("hbar_sequence")) {
    const json& s = j.at("hbar_sequence");
    if (!s.is_array()) {
      r.fail("limit.hbar_sequence", "must be an array of numbers");
    } else {
      for (std::size_t i = 0; i < s.size(); ++i) {
        const std::string path = "limit.hbar_sequence[" + std::to_string(i) + "]";
        if (!s[i].is_number()) {
          r.fail(path, "must be a number");
          continue;
        }
        const double h = s[i].get<double>();
        r.require(h > 0.0, path, "must be > 0");
        if (!c.limit.hbar_sequence.empty()) {
          r.require(h < c.limit.hbar_sequence.back(), path, "sequence must be strictly decreasing");
        }
        c.limit.hbar_sequence.push_back(h);
      }
      r.require(c.limit.hbar_sequence.size() >= 3, "limit.hbar_sequence", "needs at least 3 values");
    }
  }
  if (j.contains("points")) {
    const json& pts = j.at("points");
    if (!pts.is_array()) {
      r.fail("limit.points", "must be an array of [p, q] pairs");
    } else {
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& pt = pts[i];
        if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number()) {
          r.fail("limit.points[" + std::to_string(i) + "]", "must be a [p, q] pair of numbers");
          continue;
        }
        c.limit.points.push_back({pt[0].get<double>(), pt[1].get<double>()});
      }
    }
  }
}

}  // namespace

ExperimentConfig parse_config(const json& j, bool for_verify) {
  Reader r;
  ExperimentConfig c;
  if (!j.is_object()) throw ConfigError({"(root): config must be a JSON object"});
  c.raw = j;
  r.known(j, "", {"experiment", "description", "hbar", "family", "labels", "operator", "model",
                  "initial", "integrator", "transform", "limit", "output", "verify"});

  if (const auto e = r.string(j, "", "experiment")) {
    if (kExperiments.count(*e)) {
      c.experiment = *e;
    } else {
      r.fail("experiment", "unknown experiment '" + *e + "'");
    }
  } else if (!for_verify && !j.contains("experiment")) {
    r.fail("experiment", "required");
  }
  if (const auto h = r.number(j, "", "hbar")) {
    r.require(*h > 0.0 && *h <= 1e3, "hbar", "must be in (0, 1e3]");
    c.hbar = *h;
  }
  if (j.contains("family")) parse_family(r, j.at("family"), c);
  if (j.contains("labels")) {
    const json& l = j.at("labels");
    if (r.is_object(l, "labels")) {
      r.known(l, "labels", {"p", "q"});
      c.p_range = parse_range(r, l, "p");
      c.q_range = parse_range(r, l, "q");
    }
  }
  if (const auto op = r.string(j, "", "operator")) {
    c.op = *op;
    try {
      OperatorPolynomial::parse(c.op);
    } catch (const Error& e) {
      r.fail("operator", e.what());
    }
  }
  if (j.contains("model")) parse_model(r, j.at("model"), c);
  if (j.contains("initial")) {
    const json& x = j.at("initial");
    if (r.is_object(x, "initial")) {
      r.known(x, "initial", {"p", "q"});
      const auto p = r.number(x, "initial", "p");
      const auto q = r.number(x, "initial", "q");
      if (!p) r.fail("initial.p", "required");
      if (!q) r.fail("initial.q", "required");
      if (p && q) c.initial = Labels{*p, *q};
    }
  }
  if (j.contains("integrator")) parse_integrator(r, j.at("integrator"), c);
  if (j.contains("transform")) {
    const json& t = j.at("transform");
    if (r.is_object(t, "transform")) {
      r.known(t, "transform", {"kind", "lambda"});
      if (const auto k = r.string(t, "transform", "kind")) {
        r.require(*k == "identity" || *k == "rotation" || *k == "scaling", "transform.kind",
                  "must be identity, rotation or scaling");
        c.transform.kind = *k;
      }
      if (const auto l = r.number(t, "transform", "lambda")) {
        r.require(*l != 0.0, "transform.lambda", "must be nonzero");
        c.transform.lambda = *l;
      }
    }
  }
  if (j.contains("limit")) parse_limit(r, j.at("limit"), c);
  if (j.contains("output")) {
    const json& o = j.at("output");
    if (r.is_object(o, "output")) {
      r.known(o, "output", {"dir", "format"});
      if (const auto d = r.string(o, "output", "dir")) {
        r.require(!d->empty(), "output.dir", "must not be empty");
        c.output_dir = *d;
      }
      if (const auto f = r.string(o, "output", "format")) {
        r.require(*f == "csv" || *f == "json", "output.format", "must be 'csv' or 'json'");
        c.format = *f;
      }
    }
  }
  if (j.contains("verify")) {
    const json& v = j.at("verify");
    if (r.is_object(v, "verify")) {
      r.known(v, "verify", {"suites"});
      if (v.contains("suites")) {
        const json& s = v.at("suites");
        if (!s.is_array()) {
          r.fail("verify.suites", "must be an array of suite names");
        } else {
          for (std::size_t i = 0; i < s.size(); ++i) {
            const std::string path = "verify.suites[" + std::to_string(i) + "]";
            if (!s[i].is_string() || !kSuites.count(s[i].get<std::string>())) {
              r.fail(path, "unknown suite");
            } else {
              c.suites.push_back(s[i].get<std::string>());
            }
          }
        }
      }
    }
  }

  // Cross-field requirements.
  const auto need = [&](bool ok, const std::string& field) {
    if (!ok) r.fail(field, "required for experiment '" + c.experiment + "'");
  };
  const std::string& e = c.experiment;
  if (e == "expectation" || e == "metric" || e == "curvature") {
    need(c.family.present, "family");
    need(c.p_range.has_value(), "labels.p");
    need(c.q_range.has_value(), "labels.q");
    if (e == "expectation") need(!c.op.empty(), "operator");
    if (e == "curvature" && c.family.present) {
      r.require(c.family.kind != FamilyKind::extended, "family.kind",
                "curvature needs a family with a closed-form metric");
    }
  }
  if (e == "evolve" || e == "transform_check") {
    need(c.model.present, "model");
    need(c.initial.has_value(), "initial");
    need(c.integrator.duration.has_value(), "integrator.duration");
    if (c.model.kind == "operator") {
      need(c.family.present, "family");
      need(!c.op.empty(), "operator");
    }
    if (c.model.kind == "spin_precession") {
      r.require(c.family.present && c.family.kind == FamilyKind::spin, "family",
                "spin_precession needs a spin family");
    }
  }
  if (e == "transform_check") {
    r.require(c.integrator.sample_dt > 0.0, "integrator.sample_dt",
              "must be > 0 for transform_check (both charts share sample times)");
  }
  if (e == "limit_study") {
    need(c.limit.hbar_sequence.size() >= 3, "limit.hbar_sequence");
    need(!c.limit.points.empty(), "limit.points");
    if (c.limit.builder == "operator") need(!c.op.empty(), "operator");
    if (c.limit.builder == "hydrogen_fixed_beta" && !c.limit.hbar_sequence.empty()) {
      r.require(c.model.beta > c.limit.hbar_sequence.front(), "model.beta",
                "must exceed every hbar in limit.hbar_sequence");
    }
  }
  if (for_verify) need(!c.suites.empty(), "verify.suites");

  // Affine states exist for any beta > 0, but C2 and the grid recipe need beta > hbar.
  bool needs_states = e == "expectation" || e == "metric" ||
                      ((e == "evolve" || e == "transform_check") && c.model.kind == "operator");
  for (const auto& s : c.suites) needs_states |= s == "metric" || s == "fiducial_moments";
  if (c.family.present && c.family.kind == FamilyKind::affine && needs_states) {
    r.require(c.family.beta > c.hbar, "family.beta", "must exceed hbar to build affine states");
  }

  // Label domains.
  if (c.family.present && c.q_range && c.family.kind == FamilyKind::affine) {
    r.require(c.q_range->min > 0.0, "labels.q.min", "affine labels need q > 0");
  }
  if (c.family.present && c.p_range && c.family.kind == FamilyKind::spin) {
    const double radius = std::sqrt(c.family.s * c.hbar);
    r.require(std::max(std::abs(c.p_range->min), std::abs(c.p_range->max)) < radius, "labels.p",
              "spin labels need |p| < sqrt(s hbar) (interior of the sphere chart)");
  }
  if (c.initial && (c.model.kind == "hydrogen_classical" || c.model.kind == "hydrogen_enhanced" ||
                    e == "compare_hydrogen")) {
    r.require(c.initial->q > 0.0, "initial.q", "must be > 0 for hydrogen models");
  }
  if (e == "compare_hydrogen") {
    const Labels x0 = c.initial.value_or(Labels{0.0, 1.0});
    r.require(c.model.beta > c.hbar, "model.beta", "must exceed hbar (C2 diverges otherwise)");
    r.require(x0.p * x0.p / (2 * c.model.m) - c.model.e2 / x0.q < 0.0, "initial",
              "compare_hydrogen needs a bound classical orbit (E < 0)");
  }

  if (!r.errors.empty()) throw ConfigError(r.errors);
  return c;
}

ExperimentConfig load_config(const std::string& path, bool for_verify) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path + ": cannot open config file"});
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({path + ": " + e.what()});
  }
  return parse_config(j, for_verify);
}

// ---------------------------------------------------------------------------
// experiments

namespace {

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

std::string file_name(const std::string& stem, const std::string& format) {
  return stem + (format == "json" ? ".json" : ".csv");
}

OutputFile render_table(const std::string& stem, const Table& t, const ExperimentConfig& c,
                        const OutputHeader& h) {
  std::ostringstream os;
  if (c.format == "json") {
    json rows = json::array();
    for (const auto& r : t.rows) rows.push_back(r);
    os << json{{"header", h.to_json()}, {"columns", t.columns}, {"rows", rows}}.dump(2) << '\n';
  } else {
    write_table_csv(os, t.columns, t.rows, h);
  }
  return {file_name(stem, c.format), os.str()};
}

OutputFile render_trajectory(const std::string& stem, const Trajectory& traj,
                             const ExperimentConfig& c, const OutputHeader& h) {
  std::ostringstream os;
  if (c.format == "json") {
    os << json{{"header", h.to_json()}, {"trajectory", trajectory_to_json(traj)}}.dump(2) << '\n';
  } else {
    write_trajectory_csv(os, traj, h);
  }
  return {file_name(stem, c.format), os.str()};
}

json checks_json(const std::vector<Check>& checks) {
  json arr = json::array();
  for (const auto& k : checks) {
    arr.push_back({{"suite", k.suite},
                   {"name", k.name},
                   {"measured", k.measured},
                   {"expected", k.expected},
                   {"tolerance", k.tolerance},
                   {"passed", k.passed}});
  }
  return arr;
}

OutputFile render_summary(const std::string& stem, const json& results,
                          const std::vector<Check>& checks, const OutputHeader& h) {
  json j{{"header", h.to_json()}, {"results", results}, {"checks", checks_json(checks)}};
  return {stem + ".json", j.dump(2) + "\n"};
}

Check make_check(std::string suite, std::string name, double measured, double expected,
                 double tol) {
  const bool ok = std::isfinite(measured) && std::abs(measured - expected) <= tol;
  return {std::move(suite), std::move(name), measured, expected, tol, ok};
}

Check bound_check(std::string suite, std::string name, double measured, double bound) {
  const bool ok = std::isfinite(measured) && measured <= bound;
  return {std::move(suite), std::move(name), measured, 0.0, bound, ok};
}

FamilyParams family_params(const ExperimentConfig& c) {
  FamilyParams p;
  p.hbar = c.hbar;
  p.beta = c.family.beta;
  p.s = c.family.s;
  p.a = c.family.a;
  p.b = c.family.b;
  return p;
}

struct LabelBox {
  double p_abs = 1.0, q_abs = 1.0, q_lo = 0.25, q_hi = 4.0;
};

LabelBox label_box(const ExperimentConfig& c, double pad_p = 0.0, double pad_q = 0.0) {
  LabelBox b;
  if (c.p_range) b.p_abs = std::max(std::abs(c.p_range->min), std::abs(c.p_range->max)) + pad_p;
  if (c.q_range) {
    b.q_abs = std::max(std::abs(c.q_range->min), std::abs(c.q_range->max)) + pad_q;
    b.q_lo = std::max(1e-3, c.q_range->min * 0.9);
    b.q_hi = c.q_range->max * 1.1 + pad_q;
  }
  return b;
}

CoherentFamily make_family(const ExperimentConfig& c, const LabelBox& box) {
  const auto& f = c.family;
  switch (f.kind) {
    case FamilyKind::canonical: {
      const Eigen::Index dim = f.dim ? f.dim : required_fock_dim(box.p_abs, box.q_abs, c.hbar);
      return canonical_family(std::make_shared<const LineRep>(build_fock_rep(dim, c.hbar)));
    }
    case FamilyKind::extended: {
      const Eigen::Index dim =
          f.dim ? f.dim : 2 * required_fock_dim(box.p_abs, box.q_abs, c.hbar) + 40;
      return extended_family(std::make_shared<const LineRep>(build_fock_rep(dim, c.hbar)), f.a, f.b);
    }
    case FamilyKind::affine: {
      const HalfLineGrid g =
          f.grid ? *f.grid : recommended_halfline_grid(f.beta, c.hbar, box.q_lo, box.q_hi, box.p_abs);
      return affine_family(
          std::make_shared<const HalfLineRep>(build_halfline_rep(g.x_min, g.x_max, g.n, c.hbar)),
          f.beta);
    }
    case FamilyKind::spin:
      return spin_family(std::make_shared<const SpinRep>(build_spin_rep(f.s, c.hbar)));
  }
  throw InvalidArgument("unknown family");
}

HydrogenParams hydrogen_params(const ExperimentConfig& c) {
  HydrogenParams p;
  p.m = c.model.m;
  p.e2 = c.model.e2;
  p.beta = c.model.beta;
  p.hbar = c.hbar;
  return p;
}

EnhancedHamiltonian model_hamiltonian(const ExperimentConfig& c) {
  const std::string& k = c.model.kind;
  if (k == "oscillator") return harmonic_oscillator(c.hbar);
  if (k == "hydrogen_classical") return hydrogen_classical(hydrogen_params(c));
  if (k == "hydrogen_enhanced") return hydrogen_enhanced(hydrogen_params(c));
  if (k == "spin_precession") return spin_precession(c.model.B, build_spin_rep(c.family.s, c.hbar));
  // operator: enhance on the configured family around the initial point
  LabelBox box = label_box(c);
  if (c.initial) {
    box.p_abs = std::max(box.p_abs, 2.0 * std::abs(c.initial->p) + 2.0);
    box.q_abs = std::max(box.q_abs, 2.0 * std::abs(c.initial->q) + 2.0);
    box.q_lo = std::min(box.q_lo, 0.25 * c.initial->q);
    box.q_hi = std::max(box.q_hi, 4.0 * c.initial->q);
  }
  return enhance(OperatorPolynomial::parse(c.op), make_family(c, box));
}

double relative_drift(const Trajectory& t) {
  if (t.samples.empty()) return 0.0;
  const double h0 = t.samples.front().H;
  return t.max_energy_drift() / std::max(std::abs(h0), 1e-300);
}

json event_list(const Trajectory& t) {
  json arr = json::array();
  for (const auto& e : t.events) {
    arr.push_back({{"t", e.t}, {"kind", to_string(e.kind)}, {"p", e.p}, {"q", e.q}});
  }
  return arr;
}

double metric_deviation(FamilyKind kind, const Metric2& num, const Metric2& ref) {
  if (kind == FamilyKind::affine) {
    return std::max({std::abs(num.g_pp - ref.g_pp) / std::abs(ref.g_pp),
                     std::abs(num.g_qq - ref.g_qq) / std::abs(ref.g_qq),
                     std::abs(num.g_pq) / std::sqrt(std::abs(ref.g_pp * ref.g_qq))});
  }
  return std::max({std::abs(num.g_pp - ref.g_pp), std::abs(num.g_pq - ref.g_pq),
                   std::abs(num.g_qq - ref.g_qq)});
}

double metric_tolerance(FamilyKind kind) { return kind == FamilyKind::affine ? 1e-5 : 1e-6; }

double expected_curvature(const ExperimentConfig& c) {
  switch (c.family.kind) {
    case FamilyKind::affine: return -2.0 / c.family.beta;
    case FamilyKind::spin: return 2.0 / (c.family.s * c.hbar);
    default: return 0.0;
  }
}

// --- experiments -------------------------------------------------------------

RunResult exp_expectation(const ExperimentConfig& c, const OutputHeader& h) {
  const OperatorPolynomial poly = OperatorPolynomial::parse(c.op);
  const CoherentFamily fam = make_family(c, label_box(c));
  const EnhancedHamiltonian H = enhance(poly, fam);
  const bool classical = poly.variable_set() != VariableSet::spin;
  Table t{{"p", "q", "H"}, {}};
  if (classical) t.columns.push_back("H_classical");
  for (double p : c.p_range->values()) {
    for (double q : c.q_range->values()) {
      std::vector<double> row{p, q, H(p, q)};
      if (classical) row.push_back(poly.classical_value(p, q));
      t.rows.push_back(row);
    }
  }
  RunResult r;
  r.files.push_back(render_table("expectation", t, c, h));
  json res{{"operator", poly.to_string()}, {"family", to_string(fam.kind())}, {"rows", t.rows.size()}};
  if (!H.notes().empty()) res["notes"] = H.notes();
  r.files.push_back(render_summary("expectation_summary", res, r.checks, h));
  return r;
}

RunResult exp_metric(const ExperimentConfig& c, const OutputHeader& h) {
  const CoherentFamily fam = make_family(c, label_box(c, 0.01, 0.01));
  std::vector<MetricRow> rows;
  double worst = 0.0;
  const bool closed_form = fam.kind() != FamilyKind::extended;
  for (double p : c.p_range->values()) {
    for (double q : c.q_range->values()) {
      const Metric2 g = fs_metric_numeric(fam, p, q);
      rows.push_back({p, q, g});
      if (closed_form) {
        worst = std::max(worst, metric_deviation(fam.kind(), g,
                                                 fs_metric_analytic(fam.kind(), family_params(c), p, q)));
      }
    }
  }
  RunResult r;
  std::ostringstream os;
  if (c.format == "json") {
    Table t{{"p", "q", "g_pp", "g_pq", "g_qq"}, {}};
    for (const auto& m : rows) t.rows.push_back({m.p, m.q, m.g.g_pp, m.g.g_pq, m.g.g_qq});
    r.files.push_back(render_table("metric", t, c, h));
  } else {
    write_metric_csv(os, rows, h);
    r.files.push_back({"metric.csv", os.str()});
  }
  if (closed_form) {
    r.checks.push_back(bound_check("metric", "max deviation from closed form", worst,
                                   metric_tolerance(fam.kind())));
  }
  r.files.push_back(render_summary("metric_summary",
                                   {{"family", to_string(fam.kind())}, {"rows", rows.size()},
                                    {"max_deviation", worst}},
                                   r.checks, h));
  return r;
}

RunResult exp_curvature(const ExperimentConfig& c, const OutputHeader& h) {
  const FamilyParams fp = family_params(c);
  const double expected = expected_curvature(c);
  Table t{{"p", "q", "R"}, {}};
  double worst = 0.0;
  for (double p : c.p_range->values()) {
    for (double q : c.q_range->values()) {
      const double R = scalar_curvature(c.family.kind, fp, p, q);
      t.rows.push_back({p, q, R});
      worst = std::max(worst, std::abs(R - expected));
    }
  }
  RunResult r;
  r.files.push_back(render_table("curvature", t, c, h));
  r.checks.push_back(bound_check("curvature", "max |R - expected|", worst, 1e-6));
  r.files.push_back(render_summary(
      "curvature_summary",
      {{"family", to_string(c.family.kind)}, {"expected", expected}, {"max_deviation", worst}},
      r.checks, h));
  return r;
}

RunResult exp_evolve(const ExperimentConfig& c, const OutputHeader& h) {
  const EnhancedHamiltonian H = model_hamiltonian(c);
  const Trajectory traj = hamiltonian_flow(H, {c.initial->p, c.initial->q, 0.0},
                                           *c.integrator.duration, c.integrator.options());
  RunResult r;
  r.files.push_back(render_trajectory("trajectory", traj, c, h));
  const double drift = relative_drift(traj);
  if (!traj.has_event(EventKind::singularity_hit) && !traj.has_event(EventKind::domain_exit) &&
      c.integrator.method == IntegratorKind::dormand_prince) {
    r.checks.push_back(bound_check("evolve", "relative energy drift", drift,
                                   std::max(1e-8, 10.0 * c.integrator.tol)));
  }
  const PhasePoint end = traj.back();
  r.files.push_back(render_summary("evolve_summary",
                                   {{"model", H.provenance()},
                                    {"samples", traj.samples.size()},
                                    {"events", event_list(traj)},
                                    {"relative_energy_drift", drift},
                                    {"final", {{"t", end.t}, {"p", end.p}, {"q", end.q}}}},
                                   r.checks, h));
  return r;
}

struct HydrogenContrast {
  Trajectory classical, enhanced;
  double collapse_time = NAN, collapse_oracle = NAN, q_min = NAN, min_radius_value = NAN;
  double energy = NAN, horizon = NAN;
  HydrogenModel model;
  std::vector<Check> checks;
};

HydrogenContrast hydrogen_contrast(const ExperimentConfig& c, const std::string& suite) {
  HydrogenContrast hc;
  const HydrogenParams hp = hydrogen_params(c);
  const Labels x0 = c.initial.value_or(Labels{0.0, 1.0});
  hc.collapse_oracle = classical_collapse_time(hp, x0.p, x0.q);
  hc.horizon = c.integrator.duration.value_or(10.0 * hc.collapse_oracle);
  FlowOptions o = c.integrator.options();
  o.integrator = IntegratorKind::dormand_prince;
  hc.classical = hamiltonian_flow(hydrogen_classical(hp), {x0.p, x0.q, 0.0}, hc.horizon, o);
  hc.model = hydrogen_enhanced_model(hp);
  hc.enhanced = hamiltonian_flow(hc.model.H, {x0.p, x0.q, 0.0}, hc.horizon, o);
  // a coarse step can jump past q = 0; the crossing is the collapse as well
  for (const Event& e : hc.classical.events) {
    if (e.kind == EventKind::singularity_hit || e.kind == EventKind::domain_exit) {
      hc.collapse_time = e.t;
      break;
    }
  }
  hc.energy = hc.model.H(x0.p, x0.q);
  hc.q_min = hc.enhanced.min_q();
  hc.min_radius_value = min_radius(hc.model, hc.energy);
  hc.checks.push_back(make_check(suite, "classical collapse time (relative)",
                                 std::abs(hc.collapse_time - hc.collapse_oracle) / hc.collapse_oracle,
                                 0.0, 1e-4));
  hc.checks.push_back(make_check(suite, "enhanced singularity_hit events",
                                 hc.enhanced.has_event(EventKind::singularity_hit) ? 1.0 : 0.0, 0.0,
                                 0.0));
  hc.checks.push_back(make_check(suite, "enhanced min q vs min_radius", hc.q_min,
                                 hc.min_radius_value, 1e-6));
  return hc;
}

RunResult exp_compare_hydrogen(const ExperimentConfig& c, const OutputHeader& h) {
  HydrogenContrast hc = hydrogen_contrast(c, "compare_hydrogen");
  RunResult r;
  r.files.push_back(render_trajectory("hydrogen_classical", hc.classical, c, h));
  r.files.push_back(render_trajectory("hydrogen_enhanced", hc.enhanced, c, h));
  r.checks = hc.checks;
  r.files.push_back(render_summary("compare_hydrogen_summary",
                                   {{"collapse_time", hc.collapse_time},
                                    {"collapse_time_oracle", hc.collapse_oracle},
                                    {"horizon", hc.horizon},
                                    {"energy", hc.energy},
                                    {"q_min", hc.q_min},
                                    {"min_radius", hc.min_radius_value},
                                    {"C1", hc.model.C1},
                                    {"C2", hc.model.C2},
                                    {"bohr_ratio", bohr_ratio(hc.model)},
                                    {"classical_events", event_list(hc.classical)},
                                    {"enhanced_events", event_list(hc.enhanced)}},
                                   r.checks, h));
  return r;
}

RunResult exp_transform_check(const ExperimentConfig& c, const OutputHeader& h) {
  const EnhancedHamiltonian H = model_hamiltonian(c);
  const CanonicalTransform tr = c.transform.build();
  const PhasePoint x0{c.initial->p, c.initial->q, 0.0};
  const FlowOptions o = c.integrator.options();
  const Trajectory traj = hamiltonian_flow(H, x0, *c.integrator.duration, o);
  const Trajectory mapped = apply_transform(tr, traj);
  const double dev = equivariance_deviation(H, tr, x0, *c.integrator.duration, o);
  const TransformActionReport act = verify_transform_action(tr, traj);
  RunResult r;
  r.files.push_back(render_trajectory("trajectory", traj, c, h));
  r.files.push_back(render_trajectory("trajectory_transformed", mapped, c, h));
  r.checks.push_back(bound_check("transform_check", "equivariance deviation", dev, 1e-6));
  r.checks.push_back(bound_check("transform_check", "action identity deviation", act.deviation, 1e-6));
  r.files.push_back(render_summary("transform_check_summary",
                                   {{"transform", tr.name},
                                    {"model", H.provenance()},
                                    {"equivariance_deviation", dev},
                                    {"pdq", act.pdq_original},
                                    {"pdq_transformed", act.pdq_transformed},
                                    {"generator_difference", act.generator_difference},
                                    {"action_deviation", act.deviation}},
                                   r.checks, h));
  return r;
}

RunResult exp_limit_study(const ExperimentConfig& c, const OutputHeader& h) {
  HamiltonianBuilder builder;
  std::function<double(double, double)> classical;
  const HydrogenParams hp = hydrogen_params(c);
  bool checked = true;
  if (c.limit.builder == "operator") {
    const OperatorPolynomial poly = OperatorPolynomial::parse(c.op);
    double pm = 0.0, qm = 0.0;
    for (const auto& x : c.limit.points) {
      pm = std::max(pm, std::abs(x.p));
      qm = std::max(qm, std::abs(x.q));
    }
    builder = canonical_builder(poly, pm, qm);
    classical = [poly](double p, double q) { return poly.classical_value(p, q); };
  } else {
    builder = c.limit.builder == "hydrogen_fixed_beta"
                  ? hydrogen_builder_fixed_beta(hp)
                  : hydrogen_builder_beta_ratio(hp, c.limit.beta_ratio);
    const EnhancedHamiltonian Hc = hydrogen_classical(hp);
    classical = [Hc](double p, double q) { return Hc(p, q); };
    // With beta tied to hbar, C1 keeps an order-one factor, so H_c is not the limit.
    checked = c.limit.builder == "hydrogen_fixed_beta";
  }
  Table t{{"p", "q", "limit", "leading_power", "residual", "classical"}, {}};
  RunResult r;
  for (const auto& x : c.limit.points) {
    const LimitResult lr = classical_limit(builder, x.p, x.q, c.limit.hbar_sequence);
    const double cv = classical(x.p, x.q);
    t.rows.push_back({x.p, x.q, lr.limit, static_cast<double>(lr.leading_power), lr.residual, cv});
    if (checked) {
      const std::string at = "(" + format_double(x.p) + "," + format_double(x.q) + ")";
      r.checks.push_back(make_check("limit_study", "limit at " + at, lr.limit, cv,
                                    1e-6 * std::max(1.0, std::abs(cv))));
    }
  }
  r.files.push_back(render_table("limit_study", t, c, h));
  r.files.push_back(render_summary("limit_study_summary",
                                   {{"builder", c.limit.builder},
                                    {"hbar_sequence", c.limit.hbar_sequence},
                                    {"compared_with_classical", checked}},
                                   r.checks, h));
  return r;
}

// --- verify suites -----------------------------------------------------------

std::vector<Check> suite_fiducial_moments(const ExperimentConfig& c) {
  const std::string s = "fiducial_moments";
  const double beta = (c.family.present && c.family.kind == FamilyKind::affine) ? c.family.beta
                                                                                 : 2.0 * c.hbar;
  const HalfLineGrid g = recommended_halfline_grid(beta, c.hbar, 1.0, 1.0, 0.0);
  const HalfLineRep rep = build_halfline_rep(g.x_min, g.x_max, g.n, c.hbar);
  const StateVector fid = affine_fiducial(beta, rep);
  const double c2_exact = beta * beta * c.hbar / (2.0 * (beta - c.hbar));
  const double c2 = (rep.P_formal * fid.amplitudes()).squaredNorm();
  return {make_check(s, "<Q>", expectation(fid, rep.Q()).real(), 1.0, 1e-6),
          make_check(s, "<D>", expectation(fid, rep.D).real(), 0.0, 1e-6),
          make_check(s, "C2 relative error", std::abs(c2 - c2_exact) / c2_exact, 0.0, 1e-5)};
}

std::vector<std::pair<double, double>> suite_labels(const ExperimentConfig& c, FamilyKind kind) {
  std::vector<std::pair<double, double>> pts;
  if (c.p_range && c.q_range) {
    for (double p : c.p_range->values()) {
      for (double q : c.q_range->values()) pts.emplace_back(p, q);
    }
    return pts;
  }
  if (kind == FamilyKind::spin) {
    const double r = std::sqrt(c.family.s * c.hbar);
    return {{0.0, 0.3}, {0.5 * r, -0.7}, {-0.3 * r, 1.1}};
  }
  if (kind == FamilyKind::affine) return {{0.0, 1.0}, {0.5, 0.7}, {-0.8, 1.6}};
  return {{0.0, 0.0}, {1.0, -0.5}, {-2.0, 1.5}};
}

std::vector<Check> suite_curvature(const ExperimentConfig& c) {
  ExperimentConfig cc = c;
  if (!cc.family.present) {
    cc.family.present = true;
    cc.family.kind = FamilyKind::affine;
  }
  const double expected = expected_curvature(cc);
  double worst = 0.0, sample = NAN;
  for (auto [p, q] : suite_labels(cc, cc.family.kind)) {
    const double R = scalar_curvature(cc.family.kind, family_params(cc), p, q);
    if (std::isnan(sample)) sample = R;
    worst = std::max(worst, std::abs(R - expected));
  }
  return {make_check("curvature", "R at first label (" + to_string(cc.family.kind) + ")", sample,
                     expected, 1e-6),
          bound_check("curvature", "max |R - expected|", worst, 1e-6)};
}

std::vector<Check> suite_metric(const ExperimentConfig& c) {
  ExperimentConfig cc = c;
  if (!cc.family.present) cc.family.present = true;
  const auto pts = suite_labels(cc, cc.family.kind);
  LabelBox box;
  box.p_abs = box.q_abs = 0.0;
  box.q_lo = 1e300;
  box.q_hi = 0.0;
  for (auto [p, q] : pts) {
    box.p_abs = std::max(box.p_abs, std::abs(p) + 0.01);
    box.q_abs = std::max(box.q_abs, std::abs(q) + 0.01);
    box.q_lo = std::min(box.q_lo, std::max(1e-3, 0.9 * q));
    box.q_hi = std::max(box.q_hi, 1.1 * q);
  }
  const CoherentFamily fam = make_family(cc, box);
  double worst = 0.0;
  for (auto [p, q] : pts) {
    worst = std::max(worst, metric_deviation(fam.kind(), fs_metric_numeric(fam, p, q),
                                             fs_metric_analytic(fam.kind(), family_params(cc), p, q)));
  }
  return {bound_check("metric", "max deviation from closed form (" + to_string(fam.kind()) + ")",
                      worst, metric_tolerance(fam.kind()))};
}

std::vector<Check> suite_energy_drift(const ExperimentConfig& c) {
  ExperimentConfig cc = c;
  if (!cc.model.present) cc.model.kind = "oscillator";
  const EnhancedHamiltonian H = model_hamiltonian(cc);
  const Labels x0 = cc.initial.value_or(Labels{0.0, 1.0});
  const double T = cc.integrator.duration.value_or(2.0 * std::numbers::pi);
  FlowOptions o = cc.integrator.options();
  o.integrator = IntegratorKind::dormand_prince;
  const Trajectory traj = hamiltonian_flow(H, {x0.p, x0.q, 0.0}, T, o);
  return {bound_check("energy_drift", "max relative drift (" + H.provenance() + ")",
                      relative_drift(traj), 1e-8)};
}

std::vector<Check> suite_canonical_means(const ExperimentConfig& c) {
  const Eigen::Index dim = (c.family.present && c.family.kind == FamilyKind::canonical && c.family.dim)
                               ? c.family.dim
                               : 300;
  const auto rep = std::make_shared<const LineRep>(build_fock_rep(dim, c.hbar));
  const CoherentFamily fam = canonical_family(rep);
  double mean_err = 0.0, var_err = 0.0;
  const Range def{-3.0, 3.0, 5};
  for (double p : (c.p_range ? *c.p_range : def).values()) {
    for (double q : (c.q_range ? *c.q_range : def).values()) {
      const StateVector s = fam.state(p, q);
      mean_err = std::max({mean_err, std::abs(expectation(s, rep->P).real() - p),
                           std::abs(expectation(s, rep->Q).real() - q)});
      var_err = std::max({var_err, std::abs(variance(s, rep->P) - 0.5 * c.hbar),
                          std::abs(variance(s, rep->Q) - 0.5 * c.hbar)});
    }
  }
  return {bound_check("canonical_means", "max |<P>-p|, |<Q>-q|", mean_err, 1e-8),
          bound_check("canonical_means", "max |Var - hbar/2|", var_err, 1e-8)};
}

std::vector<Check> suite_transform_equivariance(const ExperimentConfig& c) {
  ExperimentConfig cc = c;
  if (!cc.model.present) cc.model.kind = "oscillator";
  const EnhancedHamiltonian H = model_hamiltonian(cc);
  const Labels x0 = cc.initial.value_or(Labels{0.0, 1.0});
  const double T = cc.integrator.duration.value_or(2.0 * std::numbers::pi);
  FlowOptions o = cc.integrator.options();
  o.integrator = IntegratorKind::dormand_prince;
  if (!(o.sample_dt > 0.0)) o.sample_dt = T / 500.0;
  std::vector<Check> out;
  for (const auto& tr : {rotation_transform(), scaling_transform(cc.transform.lambda)}) {
    out.push_back(bound_check("transform_equivariance", tr.name + " on " + H.provenance(),
                              equivariance_deviation(H, tr, {x0.p, x0.q, 0.0}, T, o), 1e-6));
  }
  return out;
}

std::vector<Check> suite_action_stationarity(const ExperimentConfig& c) {
  const EnhancedHamiltonian H = harmonic_oscillator(c.hbar);
  FlowOptions o;
  o.sample_dt = 2.0 * std::numbers::pi / 2000.0;
  const Trajectory traj = hamiltonian_flow(H, {0.0, 1.0, 0.0}, 2.0 * std::numbers::pi, o);
  const PerturbationSweep sw = action_perturbation_sweep(H, traj, {1e-4, 1e-3, 1e-2});
  // Stationary path: |dA| grows like eps^2.
  return {Check{"action_stationarity", "log-log slope of |dA| vs eps", sw.slope, 2.0, 0.1,
                sw.slope >= 1.9}};
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& c, const OutputHeader& h) {
  const std::string& e = c.experiment;
  if (e == "expectation") return exp_expectation(c, h);
  if (e == "metric") return exp_metric(c, h);
  if (e == "curvature") return exp_curvature(c, h);
  if (e == "evolve") return exp_evolve(c, h);
  if (e == "compare_hydrogen") return exp_compare_hydrogen(c, h);
  if (e == "transform_check") return exp_transform_check(c, h);
  if (e == "limit_study") return exp_limit_study(c, h);
  throw InvalidArgument("unknown experiment '" + e + "'");
}

RunResult run_verify(const ExperimentConfig& c, const OutputHeader& h) {
  RunResult r;
  json suites = json::array();
  for (const auto& name : c.suites) {
    std::vector<Check> checks;
    if (name == "fiducial_moments") checks = suite_fiducial_moments(c);
    else if (name == "curvature") checks = suite_curvature(c);
    else if (name == "metric") checks = suite_metric(c);
    else if (name == "energy_drift") checks = suite_energy_drift(c);
    else if (name == "canonical_means") checks = suite_canonical_means(c);
    else if (name == "hydrogen_contrast") checks = hydrogen_contrast(c, name).checks;
    else if (name == "transform_equivariance") checks = suite_transform_equivariance(c);
    else if (name == "action_stationarity") checks = suite_action_stationarity(c);
    r.checks.insert(r.checks.end(), checks.begin(), checks.end());
  }
  json report{{"header", h.to_json()}, {"passed", r.all_passed()}, {"checks", checks_json(r.checks)}};
  r.files.push_back({"verify_report.json", report.dump(2) + "\n"});
  return r;
}

// ---------------------------------------------------------------------------
// entry point

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string resolve_out_dir(const std::string& flag, const ExperimentConfig& c) {
  if (!flag.empty()) return flag;
  if (!c.output_dir.empty()) return c.output_dir;
  if (const char* env = std::getenv("EQ_OUTPUT_DIR"); env && *env) return env;
  return "eq_out";
}

void print_checks(std::ostream& out, const std::vector<Check>& checks) {
  for (const auto& k : checks) {
    out << (k.passed ? "PASS " : "FAIL ") << k.suite << ": " << k.name
        << "  measured=" << format_double(k.measured) << " expected=" << format_double(k.expected)
        << " tol=" << format_double(k.tolerance) << '\n';
  }
}

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coherent-state quantization experiments", "eq"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  bool stamp = false, verbose = false;
  for (auto* sub : {app.add_subcommand("run", "Run the experiment described by a JSON config"),
                    app.add_subcommand("verify", "Run the invariant suites listed in a JSON config")}) {
    sub->add_option("--config", config_path, "Path to the JSON config")->required();
    sub->add_option("--out", out_dir, "Output directory (overrides output.dir)");
    sub->add_flag("--stamp", stamp, "Add a generation timestamp to output headers");
    sub->add_flag("--verbose", verbose, "Progress and timing on stderr");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  const bool verify = app.got_subcommand("verify");

  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path, verify);
  } catch (const ConfigError& e) {
    err << "eq: invalid config " << config_path << '\n';
    for (const auto& d : e.diagnostics()) err << "  " << d << '\n';
    return 2;
  }

  OutputHeader header;
  header.config_hash = config_hash(cfg.raw);
  header.experiment = verify ? "verify" : cfg.experiment;
  if (stamp) header.timestamp = utc_timestamp();
  if (verbose) err << "eq " << version() << " config " << header.config_hash << '\n';

  RunResult result;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    result = verify ? run_verify(cfg, header) : run_experiment(cfg, header);
  } catch (const CapacityError& e) {
    err << "eq: " << e.kind() << ": " << e.what() << " (required dim " << e.required_dim() << ")\n";
    return 3;
  } catch (const Error& e) {
    err << "eq: " << e.kind() << ": " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "eq: error: " << e.what() << '\n';
    return 3;
  }
  if (verbose) {
    err << "computed in "
        << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
  }

  const std::filesystem::path dir = resolve_out_dir(out_dir, cfg);
  try {
    std::filesystem::create_directories(dir);
    for (const auto& f : result.files) {
      std::ofstream os(dir / f.name, std::ios::binary);
      os << f.contents;
      if (!os) throw std::runtime_error("cannot write " + (dir / f.name).string());
      out << "wrote " << (dir / f.name).string() << '\n';
    }
  } catch (const std::exception& e) {
    err << "eq: output error: " << e.what() << '\n';
    return 4;
  }
  print_checks(out, result.checks);
  std::size_t passed = 0;
  for (const auto& k : result.checks) passed += k.passed;
  out << passed << "/" << result.checks.size() << " checks passed\n";
  return result.all_passed() ? 0 : 1;
}

}  // namespace eq::cli
