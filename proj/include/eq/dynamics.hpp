#pragma once

#include <functional>
#include <string>
#include <vector>

#include "eq/correspondence.hpp"

namespace eq {

struct Labels {
  double p = 0.0;
  double q = 0.0;
};

struct PhasePoint {
  double p = 0.0;
  double q = 0.0;
  double t = 0.0;
};

enum class EventKind { none, singularity_hit, bounce, domain_exit };

std::string to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& name);

struct Event {
  double t = 0.0;
  EventKind kind = EventKind::none;
  double p = 0.0;
  double q = 0.0;
};

struct Sample {
  double t = 0.0;
  double p = 0.0;
  double q = 0.0;
  double H = 0.0;
  EventKind event = EventKind::none;
};

/// Time-ordered samples plus the events met along the way. Event points are
/// also inserted as samples, tagged with their kind.
struct Trajectory {
  std::vector<Sample> samples;
  std::vector<Event> events;

  bool has_event(EventKind kind) const;
  const Event* first_event(EventKind kind) const;
  double min_q() const;
  double max_energy_drift() const;  // max |H(t) - H(0)|
  PhasePoint back() const;
};

enum class IntegratorKind { dormand_prince, leapfrog };

struct FlowOptions {
  double tol = 1e-10;                // relative and absolute local tolerance
  double q_floor = 1e-8;             // positive-q domain: q below this is a singularity hit
  double min_step_fraction = 1e-14;  // step below this * T is a singularity hit
  double sample_dt = 0.0;            // 0: one sample per accepted step
  std::size_t max_steps = 20'000'000;
  IntegratorKind integrator = IntegratorKind::dormand_prince;
  double leapfrog_dt = 1e-3;         // fixed step of the symplectic backend (separable H)
};

/// Integrates dq/dt = dH/dp, dp/dt = -dH/dq over [x0.t, x0.t + T].
/// Collapse is reported as an event, not an exception; a non-finite gradient
/// at an accepted point raises NumericalFailure.
Trajectory hamiltonian_flow(const EnhancedHamiltonian& H, PhasePoint x0, double T,
                            const FlowOptions& options = {});
Trajectory hamiltonian_flow(const EnhancedHamiltonian& H, PhasePoint x0, double T, double tol);

/// A closed-form pair (p,q) <-> (p~,q~). `generator` is G~(p~,q~) with
/// p dq = p~ dq~ + dG~, when known.
struct CanonicalTransform {
  std::string name;
  std::function<Labels(Labels)> forward;
  std::function<Labels(Labels)> inverse;
  std::function<double(Labels)> generator;
};

CanonicalTransform identity_transform();
/// (p~, q~) = (-q, p), G~ = -p~ q~
CanonicalTransform rotation_transform();
/// (p~, q~) = (lambda p, q / lambda), G~ = 0
CanonicalTransform scaling_transform(double lambda);

struct TransformDefects {
  double max_roundtrip = 0.0;       // |inverse(forward(x)) - x|, relative
  double max_jacobian_defect = 0.0;  // |det J - 1|
};

/// Measures the invariants on `points`; throws InvalidTransform when the
/// round trip exceeds 1e-10 or |det J - 1| exceeds 1e-8.
TransformDefects check_transform(const CanonicalTransform& tr, const std::vector<Labels>& points);

PhasePoint apply_transform(const CanonicalTransform& tr, const PhasePoint& x);
Trajectory apply_transform(const CanonicalTransform& tr, const Trajectory& traj);

/// H~(p~, q~) = H(p(p~,q~), q(p~,q~)); NaN outside H's domain.
EnhancedHamiltonian transform_hamiltonian(const EnhancedHamiltonian& H,
                                          const CanonicalTransform& tr);

/// Integral of p dq along the sampled path (piecewise-quadratic in t).
double path_integral_pdq(const std::vector<Sample>& samples);

struct TransformActionReport {
  bool used_generator = false;
  double pdq_original = 0.0;
  double pdq_transformed = 0.0;
  double generator_difference = 0.0;  // G~(end) - G~(start)
  double closure_gap = 0.0;           // |x(end) - x(start)| in the closed-loop mode
  double deviation = 0.0;
  bool passed = false;
};

/// Checks int p dq - int p~ dq~ = G~(end) - G~(start), or equality of the loop
/// integrals when no generator is supplied.
TransformActionReport verify_transform_action(const CanonicalTransform& tr,
                                              const Trajectory& traj, double tol = 1e-6);

struct ActionReport {
  double pdq = 0.0;            // int p qdot dt
  double h_integral = 0.0;     // int H dt
  double raw = 0.0;            // pdq - h_integral
  double shift_corrected = 0.0;  // raw + shift * duration
};

/// int [p qdot - H] dt by composite quadrature; `shift` is a constant offset
/// of H to be removed in `shift_corrected`.
ActionReport restricted_action_value(const EnhancedHamiltonian& H, const Trajectory& traj,
                                     double shift = 0.0);

struct PerturbationSweep {
  std::vector<double> eps;
  std::vector<double> delta;  // |A(path + eps * bump) - A(path)|
  double slope = 0.0;         // least-squares log-log slope
};

/// Perturbs the path by eps * (sin(pi s), sin(2 pi s)) in (q, p), s = (t - t0)/(t1 - t0).
PerturbationSweep action_perturbation_sweep(const EnhancedHamiltonian& H, const Trajectory& traj,
                                            const std::vector<double>& eps);

/// max over common sample times of |flow(H~, T(x0)) - T(flow(H, x0))|. Requires
/// options.sample_dt > 0 so both runs share sample times.
double equivariance_deviation(const EnhancedHamiltonian& H, const CanonicalTransform& tr,
                              PhasePoint x0, double T, const FlowOptions& options);

}  // namespace eq
