#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "eq/dynamics.hpp"
#include "eq/models.hpp"
#include "oracles.hpp"

using namespace eq;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

FlowOptions sampled(double dt, double tol = 1e-10) {
  FlowOptions o;
  o.tol = tol;
  o.sample_dt = dt;
  return o;
}

EnhancedHamiltonian free_particle_half_line() {
  return EnhancedHamiltonian([](double p, double) { return 0.5 * p * p; },
                             [](double p, double) { return Gradient{p, 0.0}; }, "free", 1.0,
                             LabelDomain::positive_q);
}

}  // namespace

TEST_CASE("oscillator: one period returns to the start, energy conserved") {
  const EnhancedHamiltonian H = harmonic_oscillator(1.0);
  for (auto [p, q] : {std::pair{0.0, 1.0}, {0.7, -0.2}, {-2.0, 1.5}}) {
    const Trajectory tr = hamiltonian_flow(H, {p, q, 0.0}, kTwoPi, sampled(0.05));
    const PhasePoint e = tr.back();
    CHECK(e.t == doctest::Approx(kTwoPi));
    CHECK(std::hypot(e.p - p, e.q - q) < 1e-6);
    CHECK(tr.max_energy_drift() < 1e-8);
    CHECK(tr.events.empty());
  }
}

TEST_CASE("oscillator: samples follow the exact rotation") {
  const EnhancedHamiltonian H = harmonic_oscillator(1.0);
  const Trajectory tr = hamiltonian_flow(H, {0.0, 1.0, 0.0}, 3.0, sampled(0.1));
  CHECK(tr.samples.size() == 31);
  for (const Sample& s : tr.samples) {
    CHECK(std::abs(s.q - std::cos(s.t)) < 1e-8);
    CHECK(std::abs(s.p + std::sin(s.t)) < 1e-8);
  }
  for (std::size_t i = 1; i < tr.samples.size(); ++i) CHECK(tr.samples[i].t > tr.samples[i - 1].t);
}

TEST_CASE("classical hydrogen: collapse time matches the Kepler quadrature") {
  const EnhancedHamiltonian H = hydrogen_classical({});
  for (double p0 : {0.0, -0.2, -0.6}) {
    for (double q0 : {0.5, 1.0, 2.0, 5.0}) {
      if (p0 * p0 / 2 - 1.0 / q0 >= 0.0) continue;
      const double tc = oracle::kepler_collapse_time(1.0, 1.0, p0, q0);
      const Trajectory tr = hamiltonian_flow(H, {p0, q0, 0.0}, 2.0 * tc, 1e-10);
      const Event* hit = tr.first_event(EventKind::singularity_hit);
      CAPTURE(p0);
      CAPTURE(q0);
      REQUIRE(hit != nullptr);
      CHECK(std::abs(hit->t - tc) < 1e-4 * tc);
      CHECK(tr.back().t == doctest::Approx(hit->t));
    }
  }
}

TEST_CASE("enhanced hydrogen: bounces at the turning point instead of collapsing") {
  const HydrogenModel m = hydrogen_enhanced_model({});
  const double tc = oracle::kepler_collapse_time(1.0, 1.0, 0.0, 1.0);
  for (auto [p0, q0] : {std::pair{0.0, 1.0}, {-0.3, 2.0}, {-0.8, 0.7}}) {
    // (0, 1) starts on the inner turning point; the first return takes about 15
    const Trajectory tr = hamiltonian_flow(m.H, {p0, q0, 0.0}, 20.0 * tc, 1e-11);
    CAPTURE(p0);
    CAPTURE(q0);
    CHECK_FALSE(tr.has_event(EventKind::singularity_hit));
    CHECK_FALSE(tr.has_event(EventKind::domain_exit));
    CHECK(tr.has_event(EventKind::bounce));
    CHECK(tr.back().t == doctest::Approx(20.0 * tc));
    const double r = min_radius(m, m.H(p0, q0));
    CHECK(std::abs(tr.min_q() - r) < 1e-6);
    const Event* b = tr.first_event(EventKind::bounce);
    REQUIRE(b != nullptr);
    CHECK(std::abs(b->q - r) < 1e-6);
    CHECK(tr.max_energy_drift() < 1e-8);
  }
}

TEST_CASE("time reversal recovers the initial point") {
  const HydrogenModel m = hydrogen_enhanced_model({});
  const PhasePoint x0{0.2, 1.3, 0.0};
  const Trajectory fwd = hamiltonian_flow(m.H, x0, 5.0, 1e-12);
  const PhasePoint e = fwd.back();
  const Trajectory back = hamiltonian_flow(m.H.negated(), {e.p, e.q, 0.0}, 5.0, 1e-12);
  CHECK(std::hypot(back.back().p - x0.p, back.back().q - x0.q) < 1e-8);
}

TEST_CASE("leapfrog agrees with Dormand-Prince on separable flows") {
  FlowOptions lf;
  lf.integrator = IntegratorKind::leapfrog;
  lf.leapfrog_dt = 1e-3;
  for (const EnhancedHamiltonian& H : {harmonic_oscillator(1.0), hydrogen_enhanced({})}) {
    const PhasePoint x0{0.1, 1.2, 0.0};
    const PhasePoint a = hamiltonian_flow(H, x0, 2.0, 1e-12).back();
    const PhasePoint b = hamiltonian_flow(H, x0, 2.0, lf).back();
    CAPTURE(H.provenance());
    CHECK(b.t == doctest::Approx(2.0));
    CHECK(std::hypot(a.p - b.p, a.q - b.q) < 1e-5);
  }
}

TEST_CASE("domain events: half-line exit and spin band") {
  const Trajectory tr = hamiltonian_flow(free_particle_half_line(), {-1.0, 0.5, 0.0}, 2.0, 1e-10);
  const bool exited = tr.has_event(EventKind::domain_exit) || tr.has_event(EventKind::singularity_hit);
  CHECK(exited);
  CHECK(tr.back().t == doctest::Approx(0.5).epsilon(1e-7));

  // B S3 flow only moves q; a tilted Hamiltonian pushes p off the band
  const SpinRep rep = build_spin_rep(1.0, 1.0);
  const EnhancedHamiltonian spin = spin_precession(0.5, rep);
  const Trajectory prec = hamiltonian_flow(spin, {0.3, 0.0, 0.0}, 4.0, sampled(0.5));
  CHECK(prec.events.empty());
  CHECK(prec.back().q == doctest::Approx(0.5 * 4.0).epsilon(1e-10));
  CHECK(prec.back().p == doctest::Approx(0.3));

  const EnhancedHamiltonian tilt([](double, double q) { return -q; },
                                 [](double, double) { return Gradient{0.0, -1.0}; }, "tilt", 1.0,
                                 LabelDomain::spin_band, 1.0);
  const Trajectory out = hamiltonian_flow(tilt, {0.5, 0.0, 0.0}, 2.0, 1e-10);
  const Event* ex = out.first_event(EventKind::domain_exit);
  REQUIRE(ex != nullptr);
  CHECK(ex->t == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("non-finite gradient raises NumericalFailure") {
  const EnhancedHamiltonian bad(
      [](double p, double q) { return p * p + q; },
      [](double, double q) {
        return Gradient{q > 1.5 ? std::numeric_limits<double>::quiet_NaN() : 0.0, -1.0};
      },
      "bad", 1.0);
  CHECK_THROWS_AS(hamiltonian_flow(bad, {0.0, 2.0, 0.0}, 1.0, 1e-8), NumericalFailure);
}

TEST_CASE("canonical transforms: invariants and rejection") {
  const std::vector<Labels> pts{{0.3, 1.2}, {-1.0, 0.5}, {2.0, 3.0}};
  for (const CanonicalTransform& tr :
       {identity_transform(), rotation_transform(), scaling_transform(2.5)}) {
    const TransformDefects d = check_transform(tr, pts);
    CAPTURE(tr.name);
    CHECK(d.max_roundtrip < 1e-14);
    CHECK(d.max_jacobian_defect < 1e-8);
  }
  const Labels r = rotation_transform().forward({0.3, 1.2});
  CHECK(r.p == -1.2);
  CHECK(r.q == 0.3);

  CanonicalTransform stretch{"stretch", [](Labels x) { return Labels{2 * x.p, x.q}; },
                             [](Labels x) { return Labels{x.p / 2, x.q}; }, {}};
  CHECK_THROWS_AS(check_transform(stretch, pts), InvalidTransform);
  CanonicalTransform broken{"broken", [](Labels x) { return Labels{x.q, x.p}; },
                            [](Labels x) { return Labels{x.p, x.q}; }, {}};
  CHECK_THROWS_AS(check_transform(broken, pts), InvalidTransform);
  CHECK_THROWS_AS(scaling_transform(0.0), InvalidArgument);
}

TEST_CASE("flows commute with canonical transforms") {
  const FlowOptions o = sampled(0.05, 1e-11);
  const HydrogenModel m = hydrogen_enhanced_model({});
  for (const CanonicalTransform& tr : {rotation_transform(), scaling_transform(1.7)}) {
    CAPTURE(tr.name);
    CHECK(equivariance_deviation(harmonic_oscillator(1.0), tr, {0.4, -0.9, 0.0}, 6.0, o) < 1e-6);
    CHECK(equivariance_deviation(m.H, tr, {-0.2, 1.4, 0.0}, 6.0, o) < 1e-6);
  }
  // the transformed half-line Hamiltonian is undefined where q <= 0
  const EnhancedHamiltonian Ht = transform_hamiltonian(m.H, rotation_transform());
  CHECK(std::isnan(Ht(1.0, 0.5)));  // p = 1 -> q = -p~ < 0
  CHECK(Ht(-1.0, 0.5) == doctest::Approx(m.H(0.5, 1.0)));
}

TEST_CASE("action under transforms") {
  const Trajectory orbit =
      hamiltonian_flow(harmonic_oscillator(1.0), {0.0, 1.0, 0.0}, kTwoPi, sampled(0.01, 1e-12));
  for (const CanonicalTransform& tr : {rotation_transform(), scaling_transform(3.0)}) {
    const TransformActionReport r = verify_transform_action(tr, orbit);
    CAPTURE(tr.name);
    CHECK(r.passed);
    CHECK(r.deviation < 1e-6);
  }
  CHECK(verify_transform_action(rotation_transform(), orbit).used_generator);
}

TEST_CASE("action along the oscillator orbit") {
  const EnhancedHamiltonian H = harmonic_oscillator(1.0);
  const Trajectory orbit = hamiltonian_flow(H, {0.0, 1.0, 0.0}, kTwoPi, sampled(0.01, 1e-12));
  CHECK(path_integral_pdq(orbit.samples) == doctest::Approx(std::numbers::pi).epsilon(1e-6));
  const ActionReport a = restricted_action_value(H, orbit, 0.5);
  // H = 1 on this orbit
  CHECK(a.h_integral == doctest::Approx(kTwoPi).epsilon(1e-8));
  CHECK(a.raw == doctest::Approx(-std::numbers::pi).epsilon(1e-6));
  CHECK(std::abs(a.shift_corrected) < 1e-5);

  const Trajectory rest = hamiltonian_flow(H, {0.0, 0.0, 0.0}, 1.0, sampled(0.1));
  CHECK(path_integral_pdq(rest.samples) == 0.0);

  Trajectory two;
  two.samples.assign(orbit.samples.begin(), orbit.samples.begin() + 2);
  CHECK_THROWS_AS(restricted_action_value(H, two), InvalidArgument);
  CHECK_THROWS_AS(action_perturbation_sweep(H, two, {1e-2, 1e-3}), InvalidArgument);
  CHECK_THROWS_AS(action_perturbation_sweep(H, orbit, {1e-2}), InvalidArgument);
  // a single segment falls back to the trapezoid
  CHECK(path_integral_pdq(two.samples) ==
        doctest::Approx(0.5 * (two.samples[0].p + two.samples[1].p) *
                        (two.samples[1].q - two.samples[0].q)));
}

TEST_CASE("action is stationary: perturbation enters at second order") {
  const EnhancedHamiltonian H = harmonic_oscillator(1.0);
  const Trajectory orbit = hamiltonian_flow(H, {0.0, 1.0, 0.0}, 2.0, sampled(0.01, 1e-12));
  const PerturbationSweep sw = action_perturbation_sweep(H, orbit, {1e-2, 5e-3, 2.5e-3, 1.25e-3});
  CHECK(sw.delta.size() == 4);
  CHECK(sw.slope >= 1.9);
  CHECK(sw.slope < 2.2);

  const HydrogenModel m = hydrogen_enhanced_model({});
  const Trajectory ho = hamiltonian_flow(m.H, {0.0, 1.0, 0.0}, 2.0, sampled(0.005, 1e-12));
  CHECK(action_perturbation_sweep(m.H, ho, {1e-2, 5e-3, 2.5e-3}).slope >= 1.9);
}
