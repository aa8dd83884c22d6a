#include "eq/dynamics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace eq {

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::none: return "";
    case EventKind::singularity_hit: return "singularity_hit";
    case EventKind::bounce: return "bounce";
    case EventKind::domain_exit: return "domain_exit";
  }
  return "";
}

EventKind event_kind_from_string(const std::string& name) {
  if (name.empty() || name == "none") return EventKind::none;
  if (name == "singularity_hit") return EventKind::singularity_hit;
  if (name == "bounce") return EventKind::bounce;
  if (name == "domain_exit") return EventKind::domain_exit;
  throw InvalidArgument("unknown event kind '" + name + "'");
}

bool Trajectory::has_event(EventKind kind) const { return first_event(kind) != nullptr; }

const Event* Trajectory::first_event(EventKind kind) const {
  for (const auto& e : events) {
    if (e.kind == kind) return &e;
  }
  return nullptr;
}

double Trajectory::min_q() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) m = std::min(m, s.q);
  return m;
}

double Trajectory::max_energy_drift() const {
  if (samples.empty()) return 0.0;
  double d = 0.0;
  for (const auto& s : samples) d = std::max(d, std::abs(s.H - samples.front().H));
  return d;
}

PhasePoint Trajectory::back() const {
  if (samples.empty()) throw InvalidArgument("empty trajectory");
  const auto& s = samples.back();
  return {s.p, s.q, s.t};
}

namespace {

using State = std::array<double, 2>;  // (p, q)

bool finite(const State& s) { return std::isfinite(s[0]) && std::isfinite(s[1]); }

State rhs(const EnhancedHamiltonian& H, const State& y) {
  const Gradient g = H.gradient(y[0], y[1]);
  return {-g.dq, g.dp};
}

// Continuous extension of the Dormand-Prince step (4th order).
struct DenseSegment {
  double t0, t1;
  State y0, y1, f0, f1;
  std::array<State, 5> r;

  State at(double t) const {
    const double th = (t - t0) / (t1 - t0), th1 = 1.0 - th;
    State y;
    for (int i = 0; i < 2; ++i) {
      y[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
    }
    return y;
  }
};

// Illinois regula falsi for g(t) = 0 on [a, b] with a sign change.
template <typename G>
double find_root(const G& g, double a, double b, double ga, double gb) {
  if (ga == 0.0) return a;
  if (gb == 0.0) return b;
  int side = 0;
  for (int it = 0; it < 200; ++it) {
    const double c = (a * gb - b * ga) / (gb - ga);
    const double gc = g(c);
    if (gc == 0.0 || std::abs(b - a) < 1e-15 * (1.0 + std::abs(c))) return c;
    if ((gc > 0) == (gb > 0)) {
      b = c;
      gb = gc;
      if (side == -1) ga *= 0.5;
      side = -1;
    } else {
      a = c;
      ga = gc;
      if (side == 1) gb *= 0.5;
      side = 1;
    }
  }
  return 0.5 * (a + b);
}

class Recorder {
 public:
  Recorder(const EnhancedHamiltonian& H, double t_start, double dt, Trajectory& out)
      : H_(H), t_start_(t_start), dt_(dt), out_(out) {}

  void push(double t, const State& y, EventKind kind = EventKind::none) {
    if (!out_.samples.empty() && !(t > out_.samples.back().t)) {
      if (kind != EventKind::none && t == out_.samples.back().t) out_.samples.back().event = kind;
      return;
    }
    out_.samples.push_back({t, y[0], y[1], H_(y[0], y[1]), kind});
  }

  void event(double t, const State& y, EventKind kind) {
    out_.events.push_back({t, kind, y[0], y[1]});
    push(t, y, kind);
  }

  // Records samples in (last, t_stop] from the segment.
  void advance(const DenseSegment& seg, double t_stop) {
    if (dt_ <= 0.0) {
      push(t_stop, t_stop == seg.t1 ? seg.y1 : seg.at(t_stop));
      return;
    }
    for (;;) {
      const double tk = t_start_ + static_cast<double>(next_k_) * dt_;
      if (tk > t_stop) break;
      push(tk, tk == seg.t1 ? seg.y1 : seg.at(tk));
      ++next_k_;
    }
  }

  void finish(double t, const State& y) { push(t, y); }

 private:
  const EnhancedHamiltonian& H_;
  double t_start_, dt_;
  long next_k_ = 1;
  Trajectory& out_;
};

Trajectory flow_dormand_prince(const EnhancedHamiltonian& H, PhasePoint x0, double T,
                               const FlowOptions& opt) {
  // Dormand-Prince 5(4) tableau.
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                   b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                   d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                   d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
  (void)c2;
  (void)c3;
  (void)c4;
  (void)c5;

  Trajectory out;
  Recorder rec(H, x0.t, opt.sample_dt, out);
  const double t_end = x0.t + T;
  const double rtol = opt.tol, atol = opt.tol;
  const bool half_plane = H.domain() == LabelDomain::positive_q;
  const bool band = H.domain() == LabelDomain::spin_band;

  double t = x0.t;
  State y{x0.p, x0.q};
  State f = rhs(H, y);
  if (!finite(f)) throw NumericalFailure("hamiltonian_flow: non-finite gradient at the initial point");
  rec.push(t, y);

  const auto norm_sc = [&](const State& v, const State& ref) {
    double m = 0.0;
    for (int i = 0; i < 2; ++i) m = std::max(m, std::abs(v[i]) / (atol + rtol * std::abs(ref[i])));
    return m;
  };
  double h;
  {
    const double d0 = norm_sc(y, y), d1 = norm_sc(f, y);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, T);
  }

  std::size_t steps = 0;
  while (t < t_end) {
    if (++steps > opt.max_steps) {
      throw NumericalFailure("hamiltonian_flow: exceeded max_steps at t=" + std::to_string(t));
    }
    if (h < opt.min_step_fraction * T) {
      rec.event(t, y, EventKind::singularity_hit);
      return out;
    }
    const bool last = h >= t_end - t;
    const double hs = last ? t_end - t : h;

    const auto stage = [&](std::initializer_list<std::pair<double, const State*>> terms) {
      State s = y;
      for (const auto& [a, k] : terms) {
        for (int i = 0; i < 2; ++i) s[i] += hs * a * (*k)[i];
      }
      return s;
    };
    const State& k1 = f;
    const State k2 = rhs(H, stage({{a21, &k1}}));
    const State k3 = rhs(H, stage({{a31, &k1}, {a32, &k2}}));
    const State k4 = rhs(H, stage({{a41, &k1}, {a42, &k2}, {a43, &k3}}));
    const State k5 = rhs(H, stage({{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
    const State k6 = rhs(H, stage({{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
    const State y1 = stage({{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
    const State k7 = finite(y1) ? rhs(H, y1) : State{NAN, NAN};

    double err = std::numeric_limits<double>::infinity();
    if (finite(k2) && finite(k3) && finite(k4) && finite(k5) && finite(k6) && finite(k7)) {
      State e;
      for (int i = 0; i < 2; ++i) {
        e[i] = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      }
      err = 0.0;
      for (int i = 0; i < 2; ++i) {
        const double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(y1[i]));
        err = std::max(err, std::abs(e[i]) / sc);
      }
    }
    if (!(err <= 1.0)) {
      h = std::isfinite(err) ? hs * std::max(0.2, 0.9 * std::pow(err, -0.2)) : hs * 0.25;
      continue;
    }

    const double t1 = last ? t_end : t + hs;
    DenseSegment seg{t, t1, y, y1, f, k7, {}};
    for (int i = 0; i < 2; ++i) {
      const double dy = y1[i] - y[i], b = hs * k1[i] - dy;
      seg.r[0][i] = y[i];
      seg.r[1][i] = dy;
      seg.r[2][i] = b;
      seg.r[3][i] = dy - hs * k7[i] - b;
      seg.r[4][i] = hs * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
    }

    if (half_plane && y1[1] <= 0.0) {
      const double tc = find_root([&](double s) { return seg.at(s)[1]; }, t, t1, y[1], y1[1]);
      rec.advance(seg, tc);
      rec.event(tc, seg.at(tc), EventKind::domain_exit);
      return out;
    }
    if (half_plane && y1[1] < opt.q_floor) {
      rec.advance(seg, t1);
      rec.event(t1, y1, EventKind::singularity_hit);
      return out;
    }
    if (band && y1[0] * y1[0] > H.spin_radius() * H.spin_radius()) {
      const double r = H.spin_radius();
      const auto g = [&](double s) { return std::abs(seg.at(s)[0]) - r; };
      const double tc = find_root(g, t, t1, std::abs(y[0]) - r, std::abs(y1[0]) - r);
      rec.advance(seg, tc);
      rec.event(tc, seg.at(tc), EventKind::domain_exit);
      return out;
    }
    if (half_plane && f[1] < 0.0 && k7[1] >= 0.0) {
      const auto qdot = [&](double s) {
        const State ys = seg.at(s);
        return H.gradient(ys[0], ys[1]).dp;
      };
      const double tb = find_root(qdot, t, t1, f[1], k7[1]);
      rec.advance(seg, tb);
      rec.event(tb, tb == t1 ? y1 : seg.at(tb), EventKind::bounce);
    }
    rec.advance(seg, t1);

    t = t1;
    y = y1;
    f = k7;
    const double grow = (err == 0.0) ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2)));
    h = hs * grow;
    if (last) break;
  }
  rec.finish(t, y);
  return out;
}

Trajectory flow_leapfrog(const EnhancedHamiltonian& H, PhasePoint x0, double T,
                         const FlowOptions& opt) {
  if (!(opt.leapfrog_dt > 0.0)) throw InvalidArgument("leapfrog_dt must be positive");
  Trajectory out;
  Recorder rec(H, x0.t, 0.0, out);
  const bool half_plane = H.domain() == LabelDomain::positive_q;
  const long n = static_cast<long>(std::ceil(T / opt.leapfrog_dt - 1e-9));
  State y{x0.p, x0.q};
  double t = x0.t;
  rec.push(t, y);
  Gradient g = H.gradient(y[0], y[1]);
  if (!std::isfinite(g.dp) || !std::isfinite(g.dq)) {
    throw NumericalFailure("hamiltonian_flow: non-finite gradient at the initial point");
  }
  double qdot_prev = g.dp;
  for (long k = 0; k < n; ++k) {
    const double t1 = (k == n - 1) ? x0.t + T : x0.t + static_cast<double>(k + 1) * opt.leapfrog_dt;
    const double dt = t1 - t;
    const double p_half = y[0] - 0.5 * dt * g.dq;
    const double q1 = y[1] + dt * H.gradient(p_half, y[1]).dp;
    if (half_plane && !(q1 > 0.0)) {
      rec.event(t, y, EventKind::domain_exit);
      return out;
    }
    g = H.gradient(p_half, q1);
    const double p1 = p_half - 0.5 * dt * g.dq;
    y = {p1, q1};
    t = t1;
    g = H.gradient(p1, q1);
    if (!std::isfinite(g.dp) || !std::isfinite(g.dq)) {
      throw NumericalFailure("hamiltonian_flow: non-finite gradient at t=" + std::to_string(t));
    }
    if (half_plane && q1 < opt.q_floor) {
      rec.event(t, y, EventKind::singularity_hit);
      return out;
    }
    if (half_plane && qdot_prev < 0.0 && g.dp >= 0.0) {
      rec.event(t, y, EventKind::bounce);
    } else {
      rec.push(t, y);
    }
    qdot_prev = g.dp;
  }
  return out;
}

}  // namespace

Trajectory hamiltonian_flow(const EnhancedHamiltonian& H, PhasePoint x0, double T,
                            const FlowOptions& options) {
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("hamiltonian_flow: T must be > 0");
  if (!(options.tol > 0.0)) throw InvalidArgument("hamiltonian_flow: tol must be > 0");
  if (!H.in_domain(x0.p, x0.q)) {
    throw DomainViolation("hamiltonian_flow: initial point outside the Hamiltonian's domain");
  }
  if (options.integrator == IntegratorKind::leapfrog) return flow_leapfrog(H, x0, T, options);
  return flow_dormand_prince(H, x0, T, options);
}

Trajectory hamiltonian_flow(const EnhancedHamiltonian& H, PhasePoint x0, double T, double tol) {
  FlowOptions o;
  o.tol = tol;
  return hamiltonian_flow(H, x0, T, o);
}

// ---------------------------------------------------------------------------
// canonical transforms

CanonicalTransform identity_transform() {
  return {"identity", [](Labels x) { return x; }, [](Labels x) { return x; },
          [](Labels) { return 0.0; }};
}

CanonicalTransform rotation_transform() {
  return {"rotation", [](Labels x) { return Labels{-x.q, x.p}; },
          [](Labels x) { return Labels{x.q, -x.p}; }, [](Labels x) { return -x.p * x.q; }};
}

CanonicalTransform scaling_transform(double lambda) {
  if (!(lambda != 0.0) || !std::isfinite(lambda)) {
    throw InvalidArgument("scaling_transform: lambda must be finite and nonzero");
  }
  return {"scaling", [lambda](Labels x) { return Labels{lambda * x.p, x.q / lambda}; },
          [lambda](Labels x) { return Labels{x.p / lambda, lambda * x.q}; },
          [](Labels) { return 0.0; }};
}

namespace {

// d(out)/d(in) of a label map, central differences with one Richardson step.
Eigen::Matrix2d label_jacobian(const std::function<Labels(Labels)>& map, Labels x) {
  const double h = 1e-4 * std::max(1.0, std::max(std::abs(x.p), std::abs(x.q)));
  const auto central = [&](double step) {
    Eigen::Matrix2d j;
    const Labels pp = map({x.p + step, x.q}), pm = map({x.p - step, x.q});
    const Labels qp = map({x.p, x.q + step}), qm = map({x.p, x.q - step});
    j << (pp.p - pm.p) / (2 * step), (qp.p - qm.p) / (2 * step),
        (pp.q - pm.q) / (2 * step), (qp.q - qm.q) / (2 * step);
    return j;
  };
  return (4.0 * central(h / 2) - central(h)) / 3.0;
}

}  // namespace

TransformDefects check_transform(const CanonicalTransform& tr, const std::vector<Labels>& points) {
  if (!tr.forward || !tr.inverse) throw InvalidTransform("transform '" + tr.name + "' is incomplete");
  TransformDefects d;
  for (const Labels& x : points) {
    const Labels back = tr.inverse(tr.forward(x));
    const double scale = std::max(1.0, std::hypot(x.p, x.q));
    d.max_roundtrip = std::max(d.max_roundtrip, std::hypot(back.p - x.p, back.q - x.q) / scale);
    d.max_jacobian_defect =
        std::max(d.max_jacobian_defect, std::abs(label_jacobian(tr.forward, x).determinant() - 1.0));
  }
  if (!(d.max_roundtrip <= 1e-10)) {
    throw InvalidTransform("transform '" + tr.name + "': inverse mismatch " +
                           std::to_string(d.max_roundtrip));
  }
  if (!(d.max_jacobian_defect <= 1e-8)) {
    throw InvalidTransform("transform '" + tr.name + "': Jacobian determinant defect " +
                           std::to_string(d.max_jacobian_defect));
  }
  return d;
}

PhasePoint apply_transform(const CanonicalTransform& tr, const PhasePoint& x) {
  check_transform(tr, {{x.p, x.q}});
  const Labels y = tr.forward({x.p, x.q});
  return {y.p, y.q, x.t};
}

Trajectory apply_transform(const CanonicalTransform& tr, const Trajectory& traj) {
  std::vector<Labels> support;
  support.reserve(traj.samples.size());
  for (const auto& s : traj.samples) support.push_back({s.p, s.q});
  check_transform(tr, support);
  Trajectory out = traj;
  for (auto& s : out.samples) {
    const Labels y = tr.forward({s.p, s.q});
    s.p = y.p;
    s.q = y.q;
  }
  for (auto& e : out.events) {
    const Labels y = tr.forward({e.p, e.q});
    e.p = y.p;
    e.q = y.q;
  }
  return out;
}

EnhancedHamiltonian transform_hamiltonian(const EnhancedHamiltonian& H,
                                          const CanonicalTransform& tr) {
  auto inv = tr.inverse;
  auto eval = [H, inv](double pt, double qt) {
    const Labels x = inv({pt, qt});
    if (!H.in_domain(x.p, x.q)) return std::numeric_limits<double>::quiet_NaN();
    return H(x.p, x.q);
  };
  auto grad = [H, inv](double pt, double qt) {
    const Labels x = inv({pt, qt});
    if (!H.in_domain(x.p, x.q)) return Gradient{NAN, NAN};
    const Gradient g = H.gradient(x.p, x.q);
    const Eigen::Matrix2d j = label_jacobian(inv, {pt, qt});  // d(p,q)/d(p~,q~)
    return Gradient{g.dp * j(0, 0) + g.dq * j(1, 0), g.dp * j(0, 1) + g.dq * j(1, 1)};
  };
  return EnhancedHamiltonian(eval, grad, tr.name + "[" + H.provenance() + "]", H.hbar(),
                             LabelDomain::plane);
}

// ---------------------------------------------------------------------------
// quadrature

namespace {

struct Quadratic {
  double t0, t1, t2, v0, v1, v2;
  double value(double t) const {
    return v0 * (t - t1) * (t - t2) / ((t0 - t1) * (t0 - t2)) +
           v1 * (t - t0) * (t - t2) / ((t1 - t0) * (t1 - t2)) +
           v2 * (t - t0) * (t - t1) / ((t2 - t0) * (t2 - t1));
  }
  double slope(double t) const {
    return v0 * (2 * t - t1 - t2) / ((t0 - t1) * (t0 - t2)) +
           v1 * (2 * t - t0 - t2) / ((t1 - t0) * (t1 - t2)) +
           v2 * (2 * t - t0 - t1) / ((t2 - t0) * (t2 - t1));
  }
};

// 3-point Gauss-Legendre on [a, b].
template <typename F>
double gauss3(const F& f, double a, double b) {
  const double m = 0.5 * (a + b), r = 0.5 * (b - a);
  const double x = std::sqrt(0.6);
  return r * (5.0 * f(m - r * x) + 8.0 * f(m) + 5.0 * f(m + r * x)) / 9.0;
}

// Integrates over consecutive samples using quadratics through triples;
// `integrand(i0, t)` receives the panel's first index.
template <typename F>
double panel_quadrature(std::size_t n, const std::vector<double>& t, const F& integrand) {
  double total = 0.0;
  std::size_t i = 0;
  for (; i + 2 < n; i += 2) {
    total += gauss3([&](double s) { return integrand(i, s); }, t[i], t[i + 2]);
  }
  if (i + 1 < n) {  // one interval left: reuse the last triple
    const std::size_t i0 = n - 3;
    total += gauss3([&](double s) { return integrand(i0, s); }, t[n - 2], t[n - 1]);
  }
  return total;
}

}  // namespace

double path_integral_pdq(const std::vector<Sample>& samples) {
  const std::size_t n = samples.size();
  if (n < 2) return 0.0;
  if (n == 2) {
    return 0.5 * (samples[0].p + samples[1].p) * (samples[1].q - samples[0].q);
  }
  std::vector<double> t(n);
  for (std::size_t k = 0; k < n; ++k) t[k] = samples[k].t;
  return panel_quadrature(n, t, [&](std::size_t i, double s) {
    const Quadratic p{t[i], t[i + 1], t[i + 2], samples[i].p, samples[i + 1].p, samples[i + 2].p};
    const Quadratic q{t[i], t[i + 1], t[i + 2], samples[i].q, samples[i + 1].q, samples[i + 2].q};
    return p.value(s) * q.slope(s);
  });
}

TransformActionReport verify_transform_action(const CanonicalTransform& tr,
                                              const Trajectory& traj, double tol) {
  TransformActionReport r;
  if (traj.samples.size() < 3) throw InvalidArgument("verify_transform_action: too few samples");
  const Trajectory mapped = apply_transform(tr, traj);
  r.pdq_original = path_integral_pdq(traj.samples);
  r.pdq_transformed = path_integral_pdq(mapped.samples);
  if (tr.generator) {
    r.used_generator = true;
    const auto& a = mapped.samples.front();
    const auto& b = mapped.samples.back();
    r.generator_difference = tr.generator({b.p, b.q}) - tr.generator({a.p, a.q});
    r.deviation = std::abs(r.pdq_original - r.pdq_transformed - r.generator_difference);
    r.passed = r.deviation <= tol;
  } else {
    const auto& a = traj.samples.front();
    const auto& b = traj.samples.back();
    r.closure_gap = std::hypot(b.p - a.p, b.q - a.q);
    r.deviation = std::abs(r.pdq_original - r.pdq_transformed);
    r.passed = r.deviation <= tol && r.closure_gap <= tol;
  }
  return r;
}

namespace {

double action_of(const EnhancedHamiltonian& H, const std::vector<Sample>& s, double* pdq_out,
                 double* h_out) {
  const std::size_t n = s.size();
  std::vector<double> t(n), hv(n);
  for (std::size_t k = 0; k < n; ++k) {
    t[k] = s[k].t;
    hv[k] = H(s[k].p, s[k].q);
  }
  const double pdq = path_integral_pdq(s);
  const double hint = panel_quadrature(n, t, [&](std::size_t i, double x) {
    return Quadratic{t[i], t[i + 1], t[i + 2], hv[i], hv[i + 1], hv[i + 2]}.value(x);
  });
  if (pdq_out) *pdq_out = pdq;
  if (h_out) *h_out = hint;
  return pdq - hint;
}

}  // namespace

ActionReport restricted_action_value(const EnhancedHamiltonian& H, const Trajectory& traj,
                                     double shift) {
  if (traj.samples.size() < 3) {
    throw InvalidArgument("restricted_action_value: need at least 3 samples");
  }
  ActionReport r;
  r.raw = action_of(H, traj.samples, &r.pdq, &r.h_integral);
  const double duration = traj.samples.back().t - traj.samples.front().t;
  r.shift_corrected = r.raw + shift * duration;
  return r;
}

PerturbationSweep action_perturbation_sweep(const EnhancedHamiltonian& H, const Trajectory& traj,
                                            const std::vector<double>& eps) {
  if (traj.samples.size() < 3) {
    throw InvalidArgument("action_perturbation_sweep: need at least 3 samples");
  }
  if (eps.size() < 2) throw InvalidArgument("action_perturbation_sweep: need >= 2 amplitudes");
  const double a0 = action_of(H, traj.samples, nullptr, nullptr);
  const double t0 = traj.samples.front().t, t1 = traj.samples.back().t;
  const double pi = std::numbers::pi;
  PerturbationSweep sw;
  for (double e : eps) {
    std::vector<Sample> s = traj.samples;
    for (auto& x : s) {
      const double u = (x.t - t0) / (t1 - t0);
      x.q += e * std::sin(pi * u);
      x.p += e * std::sin(2.0 * pi * u);
    }
    sw.eps.push_back(e);
    sw.delta.push_back(std::abs(action_of(H, s, nullptr, nullptr) - a0));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(eps.size());
  for (std::size_t k = 0; k < eps.size(); ++k) {
    const double x = std::log(sw.eps[k]), y = std::log(sw.delta[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  sw.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return sw;
}

double equivariance_deviation(const EnhancedHamiltonian& H, const CanonicalTransform& tr,
                              PhasePoint x0, double T, const FlowOptions& options) {
  if (!(options.sample_dt > 0.0)) {
    throw InvalidArgument("equivariance_deviation: options.sample_dt must be > 0");
  }
  const Trajectory direct = apply_transform(tr, hamiltonian_flow(H, x0, T, options));
  const Trajectory moved =
      hamiltonian_flow(transform_hamiltonian(H, tr), apply_transform(tr, x0), T, options);
  double dev = 0.0;
  std::size_t i = 0, j = 0, matched = 0;
  while (i < direct.samples.size() && j < moved.samples.size()) {
    const double ta = direct.samples[i].t, tb = moved.samples[j].t;
    if (ta == tb) {
      dev = std::max(dev, std::hypot(direct.samples[i].p - moved.samples[j].p,
                                     direct.samples[i].q - moved.samples[j].q));
      ++matched;
      ++i;
      ++j;
    } else if (ta < tb) {
      ++i;
    } else {
      ++j;
    }
  }
  if (matched < 2) throw NumericalFailure("equivariance_deviation: no common sample times");
  return dev;
}

}  // namespace eq
