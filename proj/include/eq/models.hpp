#pragma once

#include <memory>

#include "eq/correspondence.hpp"

namespace eq {

struct HydrogenParams {
  double m = 1.0;
  double e2 = 1.0;
  double beta = 2.0;  // fiducial parameter, units of hbar
  double hbar = 1.0;

  /// Throws InvalidArgument for non-positive fields, DomainViolation for beta <= hbar.
  void validate() const;
};

/// The enhanced hydrogen Hamiltonian together with its measured constants.
struct HydrogenModel {
  HydrogenParams params;
  double C1 = 0.0;  // e2 <beta|Q^-1|beta>, measured on the half-line grid
  double C2 = 0.0;  // <beta|P^2|beta>, measured on the half-line grid
  Eigen::Index grid_points = 0;
  EnhancedHamiltonian H;

  /// Bottom of p^2/2m - C1/q + C2/(2 m q^2): q* = C2/(m C1), V(q*) = -m C1^2/(2 C2).
  double circular_radius() const { return C2 / (params.m * C1); }
  double potential_minimum() const { return -params.m * C1 * C1 / (2.0 * C2); }
};

/// H_c = p^2/(2m) - e2/q on q > 0.
EnhancedHamiltonian hydrogen_classical(const HydrogenParams& params);

/// p^2/(2m) - C1/q + C2/(2 m q^2) with C1, C2 taken from the affine fiducial.
HydrogenModel hydrogen_enhanced_model(const HydrogenParams& params);
EnhancedHamiltonian hydrogen_enhanced(const HydrogenParams& params);

/// Closed forms of the fiducial constants for the Gamma-type fiducial.
double hydrogen_c1_exact(const HydrogenParams& params);
double hydrogen_c2_exact(const HydrogenParams& params);

/// Smallest positive q with -C1/q + C2/(2 m q^2) = E. Throws InvalidArgument
/// when E lies below the potential minimum.
double min_radius(const HydrogenModel& model, double E);

/// Collapse time of the classical flow from (p0 <= 0, q0) with E < 0
/// (radial Kepler orbit, eccentric-anomaly form).
double classical_collapse_time(const HydrogenParams& params, double p0, double q0);

/// (C2/2m) / ((hbar^2 / (m e2)) C1), the measured analogue of the Bohr-radius identity.
double bohr_ratio(const HydrogenModel& model);

/// <p,q| e2 Q^-1 |p,q> on the half-line grid (Q^-1 is diagonal there).
double coulomb_expectation(const CoherentFamily& affine, double e2, double p, double q);

/// Enhanced hydrogen as a function of hbar, either at fixed beta or with
/// beta = ratio * hbar.
HamiltonianBuilder hydrogen_builder_fixed_beta(const HydrogenParams& params);
HamiltonianBuilder hydrogen_builder_beta_ratio(const HydrogenParams& params, double ratio);

/// 0.5*P^2 + 0.5*Q^2
OperatorPolynomial oscillator_polynomial();
/// (p^2 + q^2)/2 + hbar/2 in closed form.
EnhancedHamiltonian harmonic_oscillator(double hbar = 1.0);

/// B <theta,phi|S3|theta,phi> = B sqrt(s hbar) p on the band |p| <= sqrt(s hbar).
EnhancedHamiltonian spin_precession(double B, const SpinRep& rep);

}  // namespace eq
