// Acceptance run: one PASS/FAIL line per criterion, exit 0 iff all pass.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "eq/cli.hpp"
#include "eq/models.hpp"
#include "oracles.hpp"

using namespace eq;
namespace fs = std::filesystem;

namespace {

struct Line {
  int id;
  std::string title;
  bool pass = true;
  std::string detail;
  double seconds = 0.0;
  double budget = 0.0;  // 0: no runtime bound
};

class Stopwatch {
 public:
  Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

// Brioschi curvature of a metric given pointwise; fourth-order differences.
double brioschi_scalar(const std::function<Metric2(double, double)>& g, double p, double q,
                       double h) {
  struct D {
    double u, v, uu, vv, uv;
  };
  const Metric2 m0 = g(p, q);
  const Metric2 pu1 = g(p + h, q), pu2 = g(p + 2 * h, q), mu1 = g(p - h, q), mu2 = g(p - 2 * h, q);
  const Metric2 pv1 = g(p, q + h), pv2 = g(p, q + 2 * h), mv1 = g(p, q - h), mv2 = g(p, q - 2 * h);
  const auto cross = [&](double k) {
    return std::array<Metric2, 4>{g(p + k, q + k), g(p + k, q - k), g(p - k, q + k),
                                  g(p - k, q - k)};
  };
  const auto c1 = cross(h), c2 = cross(2 * h);
  const auto derive = [&](double Metric2::*f) {
    D d{};
    d.u = (-(pu2.*f) + 8 * (pu1.*f) - 8 * (mu1.*f) + (mu2.*f)) / (12 * h);
    d.v = (-(pv2.*f) + 8 * (pv1.*f) - 8 * (mv1.*f) + (mv2.*f)) / (12 * h);
    d.uu = (-(pu2.*f) + 16 * (pu1.*f) - 30 * (m0.*f) + 16 * (mu1.*f) - (mu2.*f)) / (12 * h * h);
    d.vv = (-(pv2.*f) + 16 * (pv1.*f) - 30 * (m0.*f) + 16 * (mv1.*f) - (mv2.*f)) / (12 * h * h);
    const double x1 = ((c1[0].*f) - (c1[1].*f) - (c1[2].*f) + (c1[3].*f)) / (4 * h * h);
    const double x2 = ((c2[0].*f) - (c2[1].*f) - (c2[2].*f) + (c2[3].*f)) / (16 * h * h);
    d.uv = (4 * x1 - x2) / 3;
    return d;
  };
  const D E = derive(&Metric2::g_pp), F = derive(&Metric2::g_pq), G = derive(&Metric2::g_qq);
  Eigen::Matrix3d a, b;
  a << -0.5 * E.vv + F.uv - 0.5 * G.uu, 0.5 * E.u, F.u - 0.5 * E.v,
      F.v - 0.5 * G.u, m0.g_pp, m0.g_pq,
      0.5 * G.v, m0.g_pq, m0.g_qq;
  b << 0.0, 0.5 * E.v, 0.5 * G.u,
      0.5 * E.v, m0.g_pp, m0.g_pq,
      0.5 * G.u, m0.g_pq, m0.g_qq;
  const double det = m0.g_pp * m0.g_qq - m0.g_pq * m0.g_pq;
  return 2.0 * (a.determinant() - b.determinant()) / (det * det);
}

double metric_rel_dev(const Metric2& a, const Metric2& b) {
  const double scale = std::max({std::abs(b.g_pp), std::abs(b.g_qq), std::abs(b.g_pq)});
  return std::max({std::abs(a.g_pp - b.g_pp), std::abs(a.g_pq - b.g_pq),
                   std::abs(a.g_qq - b.g_qq)}) /
         scale;
}

std::shared_ptr<const HalfLineRep> halfline(double beta, double hbar, double q_lo, double q_hi,
                                            double p_max) {
  const HalfLineGrid g = recommended_halfline_grid(beta, hbar, q_lo, q_hi, p_max);
  return std::make_shared<const HalfLineRep>(build_halfline_rep(g.x_min, g.x_max, g.n, hbar));
}

FlowOptions sampled(double dt, double tol) {
  FlowOptions o;
  o.sample_dt = dt;
  o.tol = tol;
  return o;
}

// ---------------------------------------------------------------------------

Line label_means() {
  Line l{1, "canonical label means and variances (50 labels, dim 300)"};
  const auto rep = std::make_shared<const LineRep>(build_fock_rep(300, 1.0));
  const CoherentFamily fam = canonical_family(rep);
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  double worst_mean = 0.0, worst_var = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double p = u(rng), q = u(rng);
    const StateVector s = fam.state(p, q);
    worst_mean = std::max({worst_mean, std::abs(expectation(s, rep->P).real() - p),
                           std::abs(expectation(s, rep->Q).real() - q)});
    worst_var = std::max({worst_var, std::abs(variance(s, rep->P) - 0.5),
                          std::abs(variance(s, rep->Q) - 0.5)});
  }
  l.pass = worst_mean < 1e-8 && worst_var < 1e-8;
  l.detail = "max|mean err|=" + sci(worst_mean) + " max|var err|=" + sci(worst_var) + " (tol 1e-08)";
  l.budget = 10.0;
  return l;
}

Line flat_metric() {
  Line l{2, "flat canonical metric on a 5x5 grid"};
  const auto rep = std::make_shared<const LineRep>(
      build_fock_rep(required_fock_dim(2.01, 2.01, 1.0), 1.0));
  const CoherentFamily fam = canonical_family(rep);
  double worst = 0.0;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      const double p = -2.0 + i, q = -2.0 + j;
      const Metric2 g = fs_metric_numeric(fam, p, q);
      worst = std::max({worst, std::abs(g.g_pp - 1.0), std::abs(g.g_pq), std::abs(g.g_qq - 1.0)});
    }
  }
  l.pass = worst < 1e-6;
  l.detail = "max|g - I|=" + sci(worst) + " (tol 1e-06)";
  l.budget = 30.0;
  return l;
}

Line affine_geometry() {
  Line l{3, "affine metric diag(q^2/beta, beta/q^2) and curvature -2/beta"};
  double worst_metric = 0.0, worst_curv_fd = 0.0, worst_curv_num = 0.0;
  for (double beta : {2.0, 5.0}) {
    const CoherentFamily fam = affine_family(halfline(beta, 1.0, 0.3, 2.4, 1.2), beta);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) {
        const double p = -1.0 + 0.5 * i, q = 0.5 + 0.375 * j;
        const Metric2 want = fs_metric_analytic(FamilyKind::affine, fam.params(), p, q);
        worst_metric = std::max(worst_metric, metric_rel_dev(fs_metric_numeric(fam, p, q), want));
      }
    }
    const auto numeric = [&](double p, double q) { return fs_metric_numeric(fam, p, q); };
    for (auto [p, q] : {std::pair{0.3, 1.0}, {-0.6, 1.5}}) {
      worst_curv_num =
          std::max(worst_curv_num, std::abs(brioschi_scalar(numeric, p, q, 0.01) + 2.0 / beta));
    }
  }
  for (double beta : {1.0, 2.0, 5.0}) {
    FamilyParams fp;
    fp.hbar = 1.0;
    fp.beta = beta;
    for (auto [p, q] : {std::pair{0.0, 0.5}, {0.7, 1.2}, {-1.0, 2.0}}) {
      worst_curv_fd = std::max(worst_curv_fd,
                               std::abs(scalar_curvature(FamilyKind::affine, fp, p, q) + 2.0 / beta));
    }
  }
  l.pass = worst_metric < 1e-5 && worst_curv_fd < 1e-4 && worst_curv_num < 1e-4;
  l.detail = "metric rel=" + sci(worst_metric) + " (tol 1e-05); R closed-form metric, beta 1,2,5: " +
             sci(worst_curv_fd) + "; R measured metric, beta 2,5: " + sci(worst_curv_num) +
             " (tol 1e-04)";
  return l;
}

Line spin_geometry() {
  Line l{4, "spin metric and sphere curvature 2/(s hbar)"};
  double worst_metric = 0.0, worst_curv = 0.0;
  for (double s : {0.5, 1.0, 5.0}) {
    const CoherentFamily fam =
        spin_family(std::make_shared<const SpinRep>(build_spin_rep(s, 1.0)));
    const double r = std::sqrt(s);
    for (double fp : {-0.6, -0.2, 0.0, 0.3, 0.7}) {
      for (double q : {-1.0, 0.2, 1.3}) {
        const double p = fp * r;
        const Metric2 want = fs_metric_analytic(FamilyKind::spin, fam.params(), p, q);
        worst_metric = std::max(worst_metric, metric_rel_dev(fs_metric_numeric(fam, p, q), want));
      }
    }
    const auto numeric = [&](double p, double q) { return fs_metric_numeric(fam, p, q); };
    for (double fp : {0.0, 0.4}) {
      const double R = brioschi_scalar(numeric, fp * r, 0.5, 0.02 * r);
      worst_curv = std::max(worst_curv, std::abs(R - 2.0 / s) * s / 2.0);
      const double Rc = scalar_curvature(FamilyKind::spin, fam.params(), fp * r, 0.5);
      worst_curv = std::max(worst_curv, std::abs(Rc - 2.0 / s) * s / 2.0);
    }
  }
  l.pass = worst_metric < 1e-6 && worst_curv < 1e-4;
  l.detail = "metric rel=" + sci(worst_metric) + " (tol 1e-06); curvature rel=" + sci(worst_curv) +
             " (tol 1e-04)";
  return l;
}

Line fiducial_moments() {
  Line l{5, "affine fiducial moments, C2 closed form and hbar^2 scaling"};
  double worst_moment = 0.0, worst_c2 = 0.0, worst_scaling = 0.0;
  for (double beta : {1.5, 2.0, 5.0}) {
    const auto rep = halfline(beta, 1.0, 1.0, 1.0, 0.0);
    const StateVector f = affine_fiducial(beta, *rep);
    worst_moment = std::max({worst_moment, std::abs(expectation(f, rep->Q()).real() - 1.0),
                             std::abs(expectation(f, rep->D))});
    const double c2 = (rep->P_formal * f.amplitudes()).squaredNorm();
    const double closed = beta * beta / (2 * (beta - 1.0));
    worst_c2 = std::max(worst_c2, std::abs(c2 - closed) / closed);
  }
  double ref = 0.0;
  for (double hbar : {1.0, 0.5, 0.25}) {
    HydrogenParams hp;
    hp.hbar = hbar;
    hp.beta = 2 * hbar;
    const double scaled = hydrogen_enhanced_model(hp).C2 / (hbar * hbar);
    if (ref == 0.0) ref = scaled;
    worst_scaling = std::max(worst_scaling, std::abs(scaled - ref) / ref);
    worst_c2 = std::max(worst_c2, std::abs(scaled - 2.0) / 2.0);
  }
  l.pass = worst_moment < 1e-6 && worst_c2 < 1e-5 && worst_scaling < 1e-5;
  l.detail = "moments=" + sci(worst_moment) + " (tol 1e-06); C2 rel=" + sci(worst_c2) +
             "; C2/hbar^2 spread=" + sci(worst_scaling) + " (tol 1e-05)";
  return l;
}

Line weak_correspondence() {
  Line l{6, "weak correspondence: hbar -> 0 limits of five polynomials"};
  const std::vector<double> hbars{1.0, 0.5, 0.25, 0.125, 0.0625};
  int min_power = 99;
  double worst = 0.0, worst_res = 0.0;
  for (const char* text : {"0.5*P^2 + 0.5*Q^2", "P*Q*P", "Q^4 + P^2", "P^2*Q^2 + Q^2*P^2",
                           "Q^3 - 2*P*Q*P + P"}) {
    const OperatorPolynomial poly = OperatorPolynomial::parse(text);
    if (!poly.is_hermitian() || poly.degree() > 4) return {6, l.title, false, "bad polynomial"};
    for (auto [p, q] : {std::pair{1.0, 1.0}, {-0.5, 0.8}, {0.3, -1.2}}) {
      const LimitResult r = classical_limit(canonical_builder(poly, 1.5, 1.5), p, q, hbars);
      min_power = std::min(min_power, r.leading_power);
      worst = std::max(worst, std::abs(r.limit - poly.classical_value(p, q)));
      worst_res = std::max(worst_res, r.residual);
    }
  }
  l.pass = min_power >= 1 && worst < 1e-6 && worst_res < 1e-6;
  l.detail = "min leading power=" + std::to_string(min_power) + " max|limit - classical|=" +
             sci(worst) + " fit residual=" + sci(worst_res) + " (tol 1e-06)";
  return l;
}

Line hydrogen_contrast() {
  Line l{7, "hydrogen: classical collapse vs enhanced bounce"};
  const HydrogenParams hp;
  const double tc = oracle::kepler_collapse_time(1.0, 1.0, 0.0, 1.0);
  const Trajectory cls = hamiltonian_flow(hydrogen_classical(hp), {0.0, 1.0, 0.0}, 2 * tc, 1e-10);
  const Event* hit = cls.first_event(EventKind::singularity_hit);
  const double t_err = hit ? std::abs(hit->t - tc) / tc : INFINITY;

  const HydrogenModel m = hydrogen_enhanced_model(hp);
  const Trajectory enh = hamiltonian_flow(m.H, {0.0, 1.0, 0.0}, 10 * tc, 1e-10);
  const bool clean = !enh.has_event(EventKind::singularity_hit);
  const double r_err = std::abs(enh.min_q() - min_radius(m, m.H(0.0, 1.0)));
  l.pass = t_err < 1e-4 && clean && r_err < 1e-6;
  l.detail = "collapse t rel=" + sci(t_err) + " (tol 1e-04); enhanced singularity_hit=" +
             (clean ? "none" : "present") + "; |min q - min_radius|=" + sci(r_err) + " (tol 1e-06)";
  l.budget = 60.0;
  return l;
}

double loop_gap(const CanonicalTransform& tr, const Trajectory& orbit) {
  const Trajectory t = apply_transform(tr, orbit);
  return std::abs(path_integral_pdq(orbit.samples) - path_integral_pdq(t.samples));
}

Line equivariance() {
  Line l{8, "transform equivariance and loop integrals"};
  const HydrogenModel m = hydrogen_enhanced_model({});
  const EnhancedHamiltonian osc = harmonic_oscillator(1.0);
  const FlowOptions o = sampled(0.01, 1e-12);
  double worst_flow = 0.0, worst_loop = 0.0;

  // period of the bound radial orbit from successive bounces
  const Trajectory probe = hamiltonian_flow(m.H, {-0.3, 2.0, 0.0}, 60.0, 1e-12);
  std::vector<double> bounces;
  for (const Event& e : probe.events) {
    if (e.kind == EventKind::bounce) bounces.push_back(e.t);
  }
  const double period = bounces.size() >= 2 ? bounces[1] - bounces[0] : NAN;
  const Event b0 = *probe.first_event(EventKind::bounce);

  const Trajectory osc_loop = hamiltonian_flow(osc, {0.0, 1.0, 0.0}, 2 * std::numbers::pi, o);
  const Trajectory hyd_loop = hamiltonian_flow(m.H, {b0.p, b0.q, 0.0}, period, o);

  for (const CanonicalTransform& tr : {rotation_transform(), scaling_transform(1.7)}) {
    worst_flow = std::max(worst_flow, equivariance_deviation(osc, tr, {0.4, -0.9, 0.0}, 6.0, o));
    worst_flow = std::max(worst_flow, equivariance_deviation(m.H, tr, {-0.3, 2.0, 0.0}, 6.0, o));
    worst_loop = std::max({worst_loop, loop_gap(tr, osc_loop), loop_gap(tr, hyd_loop)});
  }
  l.pass = worst_flow < 1e-6 && worst_loop < 1e-6 && std::isfinite(period);
  l.detail = "max flow deviation=" + sci(worst_flow) + "; max loop-integral gap=" + sci(worst_loop) +
             " (tol 1e-06; hydrogen period " + sci(period) + ")";
  return l;
}

Line action_stationarity() {
  Line l{9, "restricted action stationary along the harmonic orbit"};
  const EnhancedHamiltonian H = harmonic_oscillator(1.0);
  const Trajectory orbit = hamiltonian_flow(H, {0.0, 1.0, 0.0}, 2.0, sampled(0.01, 1e-12));
  const PerturbationSweep sw = action_perturbation_sweep(H, orbit, {1e-2, 3e-3, 1e-3, 3e-4, 1e-4});
  l.pass = sw.slope >= 1.9;
  l.detail = "log-log slope=" + std::to_string(sw.slope) + " over eps in [1e-4, 1e-2] (need >= 1.9)";
  return l;
}

std::string body_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::string line, body;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    body += line + '\n';
  }
  return body;
}

Line determinism() {
  Line l{10, "byte-identical CSV bodies across two runs"};
  const fs::path root = fs::temp_directory_path() / ("eq_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const std::vector<std::pair<std::string, std::string>> configs{
      {"compare", R"({"experiment": "compare_hydrogen", "model": {"kind": "hydrogen_enhanced"},
                      "initial": {"p": 0.0, "q": 1.0}})"},
      {"evolve", R"({"experiment": "evolve", "family": {"kind": "canonical"},
                     "operator": "0.5*P^2 + 0.5*Q^2", "model": {"kind": "operator"},
                     "initial": {"p": 0.0, "q": 1.0},
                     "integrator": {"duration": 6.283185307179586, "sample_dt": 0.05}})"},
      {"metric", R"({"experiment": "metric", "family": {"kind": "affine", "beta": 2.0},
                     "labels": {"p": {"min": -1, "max": 1, "count": 3},
                                "q": {"min": 0.5, "max": 2, "count": 4}}})"}};
  std::size_t compared = 0;
  for (const auto& [name, text] : configs) {
    const fs::path cfg = root / (name + ".json");
    std::ofstream(cfg) << text;
    for (const char* run : {"a", "b"}) {
      const std::string out = (root / name / run).string();
      const std::vector<std::string> args{"eq", "run", "--config", cfg.string(), "--out", out};
      std::vector<const char*> argv;
      for (const auto& a : args) argv.push_back(a.c_str());
      std::ostringstream sink;
      if (cli::main(static_cast<int>(argv.size()), argv.data(), sink, sink) != 0) {
        l.pass = false;
        l.detail = name + " run failed: " + sink.str();
      }
    }
    for (const auto& entry : fs::directory_iterator(root / name / "a")) {
      if (entry.path().extension() != ".csv") continue;
      ++compared;
      const fs::path other = root / name / "b" / entry.path().filename();
      if (body_of(entry.path()) != body_of(other)) {
        l.pass = false;
        l.detail = entry.path().filename().string() + " differs";
      }
    }
  }
  fs::remove_all(root);
  if (compared == 0) l.pass = false;
  if (l.pass) l.detail = std::to_string(compared) + " CSV files identical";
  return l;
}

}  // namespace

int main() {
  const std::vector<std::function<Line()>> criteria{
      label_means, flat_metric,   affine_geometry,      spin_geometry,      fiducial_moments,
      weak_correspondence, hydrogen_contrast, equivariance, action_stationarity, determinism};
  int failed = 0;
  for (const auto& run : criteria) {
    const Stopwatch sw;
    Line l;
    try {
      l = run();
    } catch (const std::exception& e) {
      l.pass = false;
      l.detail = std::string("exception: ") + e.what();
    }
    l.seconds = sw.seconds();
    if (l.budget > 0.0 && l.seconds >= l.budget) {
      l.pass = false;
      l.detail += "; over the " + std::to_string(static_cast<int>(l.budget)) + " s budget";
    }
    failed += !l.pass;
    std::printf("%s C%-2d %s | %s | %.2f s\n", l.pass ? "PASS" : "FAIL", l.id, l.title.c_str(),
                l.detail.c_str(), l.seconds);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
