#include "eq/models.hpp"

#include <cmath>
#include <numbers>

namespace eq {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

void HydrogenParams::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidArgument(std::string("hydrogen: ") + name + " must be positive and finite");
    }
  };
  positive(m, "m");
  positive(e2, "e2");
  positive(beta, "beta");
  positive(hbar, "hbar");
  if (!(beta > hbar)) {
    throw DomainViolation("hydrogen: beta = " + fmt(beta) + " must exceed hbar = " + fmt(hbar) +
                          " (C2 diverges otherwise)");
  }
}

EnhancedHamiltonian hydrogen_classical(const HydrogenParams& params) {
  const double m = params.m, e2 = params.e2;
  if (!(m > 0.0) || !(e2 > 0.0)) throw InvalidArgument("hydrogen_classical: m and e2 must be > 0");
  return EnhancedHamiltonian(
      [m, e2](double p, double q) { return p * p / (2 * m) - e2 / q; },
      [m, e2](double p, double q) { return Gradient{p / m, e2 / (q * q)}; }, "hydrogen-classical",
      params.hbar, LabelDomain::positive_q);
}

double hydrogen_c1_exact(const HydrogenParams& params) {
  return params.e2 * 2.0 * params.beta / (2.0 * params.beta - params.hbar);
}

double hydrogen_c2_exact(const HydrogenParams& params) {
  return params.beta * params.beta * params.hbar / (2.0 * (params.beta - params.hbar));
}

HydrogenModel hydrogen_enhanced_model(const HydrogenParams& params) {
  params.validate();
  // only fiducial constants are needed: no label spread
  const HalfLineGrid g = recommended_halfline_grid(params.beta, params.hbar, 1.0, 1.0, 0.0);
  const HalfLineRep rep = build_halfline_rep(g.x_min, g.x_max, g.n, params.hbar);
  const StateVector fid = affine_fiducial(params.beta, rep);
  const Vector& c = fid.amplitudes();

  HydrogenModel model;
  model.params = params;
  model.grid_points = g.n;
  model.C1 = params.e2 * (c.array().abs2() / rep.x.array()).sum();
  model.C2 = (rep.P_formal * c).squaredNorm();

  const double m = params.m, c1 = model.C1, c2 = model.C2;
  model.H = EnhancedHamiltonian(
      [m, c1, c2](double p, double q) { return p * p / (2 * m) - c1 / q + c2 / (2 * m * q * q); },
      [m, c1, c2](double p, double q) {
        return Gradient{p / m, c1 / (q * q) - c2 / (m * q * q * q)};
      },
      "hydrogen-enhanced", params.hbar, LabelDomain::positive_q);
  return model;
}

EnhancedHamiltonian hydrogen_enhanced(const HydrogenParams& params) {
  return hydrogen_enhanced_model(params).H;
}

double min_radius(const HydrogenModel& model, double E) {
  const double m = model.params.m, c1 = model.C1, c2 = model.C2;
  if (!std::isfinite(E)) throw InvalidArgument("min_radius: E must be finite");
  const double v_min = model.potential_minimum();
  // E q^2 + C1 q - C2/(2m) = 0, smallest positive root in the cancellation-free form.
  double disc = c1 * c1 + 2.0 * E * c2 / m;
  if (disc < 0.0) {
    if (E < v_min - 1e-12 * std::abs(v_min)) {
      throw InvalidArgument("min_radius: E = " + fmt(E) + " lies below the potential minimum " +
                            fmt(v_min));
    }
    disc = 0.0;
  }
  double q = (c2 / m) / (c1 + std::sqrt(disc));
  const auto V = [&](double x) { return -c1 / x + c2 / (2 * m * x * x); };
  for (int it = 0; it < 4; ++it) {
    const double dv = c1 / (q * q) - c2 / (m * q * q * q);
    if (std::abs(dv) < 1e-8 * std::abs(c1 / (q * q))) break;  // at the vertex
    const double step = (V(q) - E) / dv;
    q -= step;
    if (std::abs(step) <= 1e-16 * q) break;
  }
  return q;
}

double classical_collapse_time(const HydrogenParams& params, double p0, double q0) {
  const double m = params.m, e2 = params.e2;
  if (!(q0 > 0.0)) throw DomainViolation("classical_collapse_time: q0 must be > 0");
  const double E = p0 * p0 / (2 * m) - e2 / q0;
  if (!(E < 0.0)) throw InvalidArgument("classical_collapse_time: needs a bound orbit (E < 0)");
  const double q_max = e2 / -E;
  const double scale = std::sqrt(m * q_max * q_max * q_max / (8.0 * e2));
  const double eta0 = std::acos(std::clamp(1.0 - 2.0 * q0 / q_max, -1.0, 1.0));
  const double t0 = scale * (eta0 - std::sin(eta0));
  if (p0 <= 0.0) return t0;
  return 2.0 * scale * std::numbers::pi - t0;
}

double bohr_ratio(const HydrogenModel& model) {
  const auto& p = model.params;
  return (model.C2 / (2 * p.m)) / (p.hbar * p.hbar / (p.m * p.e2) * model.C1);
}

double coulomb_expectation(const CoherentFamily& affine, double e2, double p, double q) {
  const HalfLineRep* rep = affine.halfline();
  if (!rep) throw InvalidArgument("coulomb_expectation: needs an affine family");
  const Vector& c = affine.state(p, q).amplitudes();
  return e2 * (c.array().abs2() / rep->x.array()).sum();
}

HamiltonianBuilder hydrogen_builder_fixed_beta(const HydrogenParams& params) {
  return [params](double hbar) {
    HydrogenParams p = params;
    p.hbar = hbar;
    return hydrogen_enhanced(p);
  };
}

HamiltonianBuilder hydrogen_builder_beta_ratio(const HydrogenParams& params, double ratio) {
  if (!(ratio > 1.0)) throw DomainViolation("hydrogen_builder_beta_ratio: ratio must exceed 1");
  return [params, ratio](double hbar) {
    HydrogenParams p = params;
    p.hbar = hbar;
    p.beta = ratio * hbar;
    return hydrogen_enhanced(p);
  };
}

OperatorPolynomial oscillator_polynomial() { return OperatorPolynomial::parse("0.5*P^2 + 0.5*Q^2"); }

EnhancedHamiltonian harmonic_oscillator(double hbar) {
  if (!(hbar > 0.0)) throw InvalidArgument("harmonic_oscillator: hbar must be > 0");
  return EnhancedHamiltonian(
      [hbar](double p, double q) { return 0.5 * (p * p + q * q) + 0.5 * hbar; },
      [](double p, double q) { return Gradient{p, q}; }, "oscillator", hbar);
}

EnhancedHamiltonian spin_precession(double B, const SpinRep& rep) {
  if (!std::isfinite(B)) throw InvalidArgument("spin_precession: B must be finite");
  const double r = std::sqrt(rep.s() * rep.hbar);
  return EnhancedHamiltonian([B, r](double p, double) { return B * r * p; },
                             [B, r](double, double) { return Gradient{B * r, 0.0}; },
                             "spin-precession", rep.hbar, LabelDomain::spin_band, r);
}

}  // namespace eq
