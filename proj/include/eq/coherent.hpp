#pragma once

#include <functional>
#include <memory>
#include <string>
#include <variant>

#include "eq/hilbert.hpp"

namespace eq {

enum class FamilyKind { canonical, affine, spin, extended };

std::string to_string(FamilyKind kind);
FamilyKind family_kind_from_string(const std::string& name);

/// Parameters shared by the analytic metric/curvature routines and the families.
struct FamilyParams {
  double hbar = 1.0;
  double beta = 0.0;  // affine fiducial weight, units of hbar
  double s = 0.0;     // spin
  double a = 0.0;     // extended: oscillator rotation
  double b = 0.0;     // extended: squeeze
};

/// Components of a 2x2 metric in (p, q) labels.
template <typename Scalar = double>
struct MetricTensor2 {
  Scalar g_pp{}, g_pq{}, g_qq{};

  Scalar determinant() const { return g_pp * g_qq - g_pq * g_pq; }
  bool positive_definite() const { return g_pp > Scalar(0) && determinant() > Scalar(0); }
  Eigen::Matrix<Scalar, 2, 2> matrix() const {
    Eigen::Matrix<Scalar, 2, 2> m;
    m << g_pp, g_pq, g_pq, g_qq;
    return m;
  }
};

using Metric2 = MetricTensor2<double>;

/// A (p, q) -> StateVector map generated by unitary group elements acting on a
/// fiducial vector. Immutable and cheap to copy (the representation is shared).
class CoherentFamily {
 public:
  FamilyKind kind() const noexcept { return kind_; }
  const FamilyParams& params() const noexcept { return params_; }
  const StateVector& fiducial() const noexcept { return fiducial_; }
  double hbar() const noexcept { return params_.hbar; }

  const LineRep* line() const;
  const HalfLineRep* halfline() const;
  const SpinRep* spin() const;

  bool in_domain(double p, double q) const;
  /// Throws DomainViolation outside the label domain.
  StateVector state(double p, double q) const;
  /// State map without the domain check (finite-difference stencils near edges).
  StateVector state_unchecked(double p, double q) const;

  /// Norm of the defining annihilation relation applied to the fiducial.
  double fiducial_residual() const;

  friend CoherentFamily canonical_family(std::shared_ptr<const LineRep> rep);
  friend CoherentFamily affine_family(std::shared_ptr<const HalfLineRep> rep, double beta);
  friend CoherentFamily spin_family(std::shared_ptr<const SpinRep> rep);
  friend CoherentFamily extended_family(std::shared_ptr<const LineRep> rep, double a, double b);

 private:
  FamilyKind kind_ = FamilyKind::canonical;
  FamilyParams params_;
  StateVector fiducial_;
  std::variant<std::shared_ptr<const LineRep>, std::shared_ptr<const HalfLineRep>,
               std::shared_ptr<const SpinRep>>
      rep_;
  // extended family only
  std::shared_ptr<const UnitaryGenerator> oscillator_gen_, squeeze_gen_;
};

CoherentFamily canonical_family(std::shared_ptr<const LineRep> rep);
/// beta > hbar is required (finite <P^2>).
CoherentFamily affine_family(std::shared_ptr<const HalfLineRep> rep, double beta);
CoherentFamily spin_family(std::shared_ptr<const SpinRep> rep);
CoherentFamily extended_family(std::shared_ptr<const LineRep> rep, double a, double b);

/// Smallest Fock dimension whose tail beyond (dim - margin) carries amplitude
/// below `tail_tol` for the canonical coherent state at (p, q).
Eigen::Index required_fock_dim(double p, double q, double hbar, double tail_tol = 1e-12,
                               Eigen::Index margin = 20);

/// exp(-iqP/hbar) exp(ipQ/hbar)|0>. Throws CapacityError when the truncation is
/// inadequate for (p, q).
StateVector canonical_cs(double p, double q, const LineRep& rep);

/// Normalized samples of M x^{beta/hbar - 1/2} exp(-beta x / hbar).
StateVector affine_fiducial(double beta, const HalfLineRep& rep);

/// exp(ipQ/hbar) exp(-i ln(q) D/hbar)|beta>, q > 0.
StateVector affine_cs(double p, double q, const CoherentFamily& family);

struct SpinAngles {
  double theta = 0.0;
  double phi = 0.0;
};

/// p = sqrt(s hbar) cos(theta), q = sqrt(s hbar) phi.
SpinAngles pq_to_angles(double p, double q, double s, double hbar);
std::pair<double, double> angles_to_pq(double theta, double phi, double s, double hbar);

/// exp(-i phi S3/hbar) exp(-i theta S2/hbar)|s,s>, theta in [0, pi], phi in (-pi, pi].
StateVector spin_cs(double theta, double phi, const SpinRep& rep);

/// exp(-ia(P^2+Q^2)/hbar) exp(-ib(PQ+QP)/hbar)|p,q>. Throws CapacityError when
/// the tail amplitude beyond dim-20 exceeds 1e-10.
StateVector extended_cs(double p, double q, double a, double b, const LineRep& rep);

/// <s1|s2>
cplx overlap(const StateVector& s1, const StateVector& s2);

using StateMap = std::function<StateVector(double p, double q)>;

/// Single central-difference Fubini-Study metric with step h (no extrapolation).
Metric2 fs_metric_central(const StateMap& map, double p, double q, double h, double hbar);

/// Fubini-Study metric 2 hbar [<dψ|dψ> - |<ψ|dψ>|^2] by central differences with
/// Richardson extrapolation over h, h/2, h/4. Throws NumericalFailure when the
/// two extrapolants disagree beyond `rtol`.
Metric2 fs_metric_numeric(const StateMap& map, double p, double q, double h, double hbar,
                          double rtol = 1e-6);
Metric2 fs_metric_numeric(const CoherentFamily& family, double p, double q, double h = 1e-4);

/// Closed-form metric on each family's label sheet.
Metric2 fs_metric_analytic(FamilyKind kind, const FamilyParams& params, double p, double q);

/// Scalar curvature (twice the Gaussian curvature) of the analytic metric,
/// computed by finite differences of its components.
double scalar_curvature(FamilyKind kind, const FamilyParams& params, double p, double q);

/// Log-grid settings adequate for an affine family with labels q in
/// [q_lo, q_hi] and |p| <= p_max.
struct HalfLineGrid {
  double x_min = 0.0;
  double x_max = 0.0;
  Eigen::Index n = 0;
};
HalfLineGrid recommended_halfline_grid(double beta, double hbar, double q_lo = 0.25,
                                       double q_hi = 4.0, double p_max = 2.0);

}  // namespace eq
