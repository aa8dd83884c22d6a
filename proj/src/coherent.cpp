#include "eq/coherent.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace eq {

namespace {

constexpr double kPi = std::numbers::pi;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void require_positive_hbar(double hbar) {
  if (!(hbar > 0.0)) throw InvalidArgument("hbar must be positive");
}

// log of the Poisson tail sum_{n >= start} e^{-lambda} lambda^n / n!
double poisson_tail(double lambda, Eigen::Index start) {
  if (start <= 0) return 1.0;
  if (lambda == 0.0) return 0.0;
  double log_term = -lambda + static_cast<double>(start) * std::log(lambda) -
                    std::lgamma(static_cast<double>(start) + 1.0);
  double sum = 0.0;
  for (Eigen::Index n = start; n < start + 100000; ++n) {
    const double term = std::exp(log_term);
    sum += term;
    if (static_cast<double>(n) > lambda && term < 1e-40 * std::max(sum, 1e-300)) break;
    if (term == 0.0 && static_cast<double>(n) > lambda) break;
    log_term += std::log(lambda) - std::log(static_cast<double>(n) + 1.0);
  }
  return sum;
}

double tail_amplitude(const Vector& v, Eigen::Index from) {
  if (from <= 0) return v.norm();
  if (from >= v.size()) return 0.0;
  return v.tail(v.size() - from).norm();
}

}  // namespace

std::string to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::canonical: return "canonical";
    case FamilyKind::affine: return "affine";
    case FamilyKind::spin: return "spin";
    case FamilyKind::extended: return "extended";
  }
  return "unknown";
}

FamilyKind family_kind_from_string(const std::string& name) {
  if (name == "canonical") return FamilyKind::canonical;
  if (name == "affine") return FamilyKind::affine;
  if (name == "spin") return FamilyKind::spin;
  if (name == "extended") return FamilyKind::extended;
  throw InvalidArgument("unknown family kind '" + name + "'");
}

// ---------------------------------------------------------------------------
// state maps

Eigen::Index required_fock_dim(double p, double q, double hbar, double tail_tol,
                               Eigen::Index margin) {
  require_positive_hbar(hbar);
  const double lambda = (p * p + q * q) / (2.0 * hbar);
  const double target = tail_tol * tail_tol;
  Eigen::Index n = static_cast<Eigen::Index>(std::floor(lambda)) + 1;
  while (poisson_tail(lambda, n) >= target) n += 1;
  return std::max<Eigen::Index>(n + margin, 2);
}

StateVector canonical_cs(double p, double q, const LineRep& rep) {
  const double lambda = (p * p + q * q) / (2.0 * rep.hbar);
  const double tail = std::sqrt(poisson_tail(lambda, rep.dim - 20));
  if (!(tail < 1e-12)) {
    const Eigen::Index need = required_fock_dim(p, q, rep.hbar);
    throw CapacityError("canonical_cs: truncation dim=" + std::to_string(rep.dim) +
                            " inadequate for (p,q)=(" + fmt(p) + "," + fmt(q) +
                            "); need dim >= " + std::to_string(need),
                        need);
  }
  Vector v = Vector::Zero(rep.dim);
  v(0) = 1.0;
  v = rep.Q_gen.apply(-p, v);  // exp(+ipQ/hbar)
  v = rep.P_gen.apply(q, v);   // exp(-iqP/hbar)
  return StateVector::normalized(std::move(v));
}

StateVector affine_fiducial(double beta, const HalfLineRep& rep) {
  if (!(beta > rep.hbar)) {
    throw DomainViolation("affine_fiducial: beta=" + fmt(beta) + " must exceed hbar=" +
                          fmt(rep.hbar) + " (C2 = <beta|P^2|beta> diverges otherwise)");
  }
  const double b = beta / rep.hbar;
  const double a = b - 0.5;
  // |psi|^2 is a Gamma density with shape 2a+1 and rate 2b.
  const double log_m = 0.5 * ((2.0 * a + 1.0) * std::log(2.0 * b) - std::lgamma(2.0 * a + 1.0));
  Vector v(rep.size());
  for (Eigen::Index j = 0; j < rep.size(); ++j) {
    const double x = rep.x(j);
    const double log_amp = 0.5 * std::log(rep.weights(j)) + log_m + a * std::log(x) - b * x;
    v(j) = std::exp(log_amp);
  }
  return StateVector::normalized(std::move(v));
}

StateVector affine_cs(double p, double q, const CoherentFamily& family) {
  if (family.kind() != FamilyKind::affine) throw InvalidArgument("affine_cs: family is not affine");
  return family.state(p, q);
}

SpinAngles pq_to_angles(double p, double q, double s, double hbar) {
  const double r = std::sqrt(s * hbar);
  if (!(p * p <= s * hbar)) {
    throw DomainViolation("spin label p=" + fmt(p) + " outside [-sqrt(s hbar), sqrt(s hbar)]");
  }
  if (!(q > -kPi * r && q <= kPi * r)) {
    throw DomainViolation("spin label q=" + fmt(q) + " outside (-pi sqrt(s hbar), pi sqrt(s hbar)]");
  }
  return {std::acos(std::clamp(p / r, -1.0, 1.0)), q / r};
}

std::pair<double, double> angles_to_pq(double theta, double phi, double s, double hbar) {
  if (!(theta >= 0.0 && theta <= kPi)) throw DomainViolation("theta outside [0, pi]");
  if (!(phi > -kPi && phi <= kPi)) throw DomainViolation("phi outside (-pi, pi]");
  const double r = std::sqrt(s * hbar);
  return {r * std::cos(theta), r * phi};
}

namespace {

Vector spin_top(const SpinRep& rep) {
  Vector v = Vector::Zero(rep.dim());
  v(0) = 1.0;
  return v;
}

Vector spin_rotate(const SpinRep& rep, double theta, double phi) {
  Vector v = rep.S2_gen.apply(theta, spin_top(rep));
  return rep.S3_gen.apply(phi, v);
}

}  // namespace

StateVector spin_cs(double theta, double phi, const SpinRep& rep) {
  if (!(theta >= 0.0 && theta <= kPi)) throw DomainViolation("spin_cs: theta outside [0, pi]");
  if (!(phi > -kPi && phi <= kPi)) throw DomainViolation("spin_cs: phi outside (-pi, pi]");
  return StateVector::normalized(spin_rotate(rep, theta, phi));
}

namespace {

struct ExtendedGenerators {
  UnitaryGenerator oscillator, squeeze;
};

ExtendedGenerators extended_generators(const LineRep& rep) {
  return {UnitaryGenerator::from_hermitian(rep.P * rep.P + rep.Q * rep.Q, rep.hbar),
          UnitaryGenerator::from_hermitian(rep.P * rep.Q + rep.Q * rep.P, rep.hbar)};
}

StateVector extended_apply(double p, double q, double a, double b, const LineRep& rep,
                           const UnitaryGenerator& osc, const UnitaryGenerator& sq) {
  Vector v = canonical_cs(p, q, rep).amplitudes();
  v = sq.apply(b, v);
  v = osc.apply(a, v);
  const double tail = tail_amplitude(v, rep.dim - 20);
  if (!(tail <= 1e-10)) {
    throw CapacityError("extended_cs: tail amplitude " + fmt(tail) + " beyond level " +
                            std::to_string(rep.dim - 20) + " exceeds 1e-10; increase dim",
                        2 * rep.dim);
  }
  return StateVector::normalized(std::move(v));
}

}  // namespace

StateVector extended_cs(double p, double q, double a, double b, const LineRep& rep) {
  const auto gens = extended_generators(rep);
  return extended_apply(p, q, a, b, rep, gens.oscillator, gens.squeeze);
}

cplx overlap(const StateVector& s1, const StateVector& s2) {
  if (s1.dim() != s2.dim()) {
    throw InvalidArgument("overlap: dimension mismatch " + std::to_string(s1.dim()) + " vs " +
                          std::to_string(s2.dim()));
  }
  return s1.amplitudes().dot(s2.amplitudes());
}

// ---------------------------------------------------------------------------
// families

const LineRep* CoherentFamily::line() const {
  if (auto* r = std::get_if<std::shared_ptr<const LineRep>>(&rep_)) return r->get();
  return nullptr;
}
const HalfLineRep* CoherentFamily::halfline() const {
  if (auto* r = std::get_if<std::shared_ptr<const HalfLineRep>>(&rep_)) return r->get();
  return nullptr;
}
const SpinRep* CoherentFamily::spin() const {
  if (auto* r = std::get_if<std::shared_ptr<const SpinRep>>(&rep_)) return r->get();
  return nullptr;
}

bool CoherentFamily::in_domain(double p, double q) const {
  if (!std::isfinite(p) || !std::isfinite(q)) return false;
  switch (kind_) {
    case FamilyKind::canonical:
    case FamilyKind::extended: return true;
    case FamilyKind::affine: return q > 0.0;
    case FamilyKind::spin: {
      const double r = std::sqrt(params_.s * params_.hbar);
      return p * p <= r * r && q > -kPi * r && q <= kPi * r;
    }
  }
  return false;
}

StateVector CoherentFamily::state(double p, double q) const {
  if (!in_domain(p, q)) {
    throw DomainViolation(to_string(kind_) + " family: label (" + fmt(p) + "," + fmt(q) +
                          ") outside the label domain");
  }
  return state_unchecked(p, q);
}

StateVector CoherentFamily::state_unchecked(double p, double q) const {
  switch (kind_) {
    case FamilyKind::canonical: return canonical_cs(p, q, *line());
    case FamilyKind::extended:
      return extended_apply(p, q, params_.a, params_.b, *line(), *oscillator_gen_, *squeeze_gen_);
    case FamilyKind::affine: {
      if (!(q > 0.0)) throw DomainViolation("affine family: q must be > 0");
      const HalfLineRep& rep = *halfline();
      Vector v = rep.D_gen.apply(std::log(q), fiducial_.amplitudes());
      v = rep.Q_gen.apply(-p, v);
      return StateVector::normalized(std::move(v));
    }
    case FamilyKind::spin: {
      const double r = std::sqrt(params_.s * params_.hbar);
      const double theta = std::acos(std::clamp(p / r, -1.0, 1.0));
      return StateVector::normalized(spin_rotate(*spin(), theta, q / r));
    }
  }
  throw InvalidArgument("unknown family kind");
}

double CoherentFamily::fiducial_residual() const {
  const Vector& f = fiducial_.amplitudes();
  const cplx i(0.0, 1.0);
  switch (kind_) {
    case FamilyKind::canonical:
    case FamilyKind::extended: {
      const LineRep& rep = *line();
      return (rep.Q * f + i * (rep.P * f)).norm();
    }
    case FamilyKind::affine: {
      const HalfLineRep& rep = *halfline();
      const Vector lhs = (rep.x.array() - 1.0).matrix().cast<cplx>().cwiseProduct(f) +
                         (i / params_.beta) * (rep.D * f);
      return lhs.norm();
    }
    case FamilyKind::spin: {
      const SpinRep& rep = *spin();
      return (rep.S1 * f + i * (rep.S2 * f)).norm();
    }
  }
  return 0.0;
}

CoherentFamily canonical_family(std::shared_ptr<const LineRep> rep) {
  if (!rep) throw InvalidArgument("canonical_family: null representation");
  CoherentFamily fam;
  fam.kind_ = FamilyKind::canonical;
  fam.params_.hbar = rep->hbar;
  Vector v = Vector::Zero(rep->dim);
  v(0) = 1.0;
  fam.fiducial_ = StateVector::normalized(std::move(v));
  fam.rep_ = std::move(rep);
  return fam;
}

CoherentFamily affine_family(std::shared_ptr<const HalfLineRep> rep, double beta) {
  if (!rep) throw InvalidArgument("affine_family: null representation");
  CoherentFamily fam;
  fam.kind_ = FamilyKind::affine;
  fam.params_.hbar = rep->hbar;
  fam.params_.beta = beta;
  fam.fiducial_ = affine_fiducial(beta, *rep);
  fam.rep_ = std::move(rep);
  return fam;
}

CoherentFamily spin_family(std::shared_ptr<const SpinRep> rep) {
  if (!rep) throw InvalidArgument("spin_family: null representation");
  CoherentFamily fam;
  fam.kind_ = FamilyKind::spin;
  fam.params_.hbar = rep->hbar;
  fam.params_.s = rep->s();
  fam.fiducial_ = StateVector::normalized(spin_top(*rep));
  fam.rep_ = std::move(rep);
  return fam;
}

CoherentFamily extended_family(std::shared_ptr<const LineRep> rep, double a, double b) {
  if (!rep) throw InvalidArgument("extended_family: null representation");
  CoherentFamily fam;
  fam.kind_ = FamilyKind::extended;
  fam.params_.hbar = rep->hbar;
  fam.params_.a = a;
  fam.params_.b = b;
  Vector v = Vector::Zero(rep->dim);
  v(0) = 1.0;
  fam.fiducial_ = StateVector::normalized(std::move(v));
  auto gens = extended_generators(*rep);
  fam.oscillator_gen_ = std::make_shared<const UnitaryGenerator>(std::move(gens.oscillator));
  fam.squeeze_gen_ = std::make_shared<const UnitaryGenerator>(std::move(gens.squeeze));
  fam.rep_ = std::move(rep);
  return fam;
}

// ---------------------------------------------------------------------------
// Fubini-Study geometry

Metric2 fs_metric_central(const StateMap& map, double p, double q, double h, double hbar) {
  const Vector psi = map(p, q).amplitudes();
  const Vector dp = (map(p + h, q).amplitudes() - map(p - h, q).amplitudes()) / (2.0 * h);
  const Vector dq = (map(p, q + h).amplitudes() - map(p, q - h).amplitudes()) / (2.0 * h);
  const cplx ap = psi.dot(dp);  // <psi|d_p psi>
  const cplx aq = psi.dot(dq);
  const auto component = [&](const Vector& di, const cplx& ai, const Vector& dj, const cplx& aj) {
    return 2.0 * hbar * (di.dot(dj) - std::conj(ai) * aj).real();
  };
  Metric2 g;
  g.g_pp = component(dp, ap, dp, ap);
  g.g_qq = component(dq, aq, dq, aq);
  g.g_pq = 0.5 * (component(dp, ap, dq, aq) + component(dq, aq, dp, ap));
  return g;
}

Metric2 fs_metric_numeric(const StateMap& map, double p, double q, double h, double hbar,
                          double rtol) {
  if (!(h > 0.0)) throw InvalidArgument("fs_metric_numeric: step must be positive");
  const std::array<Metric2, 3> g = {fs_metric_central(map, p, q, h, hbar),
                                    fs_metric_central(map, p, q, h / 2.0, hbar),
                                    fs_metric_central(map, p, q, h / 4.0, hbar)};
  const auto extrapolate = [](const Metric2& coarse, const Metric2& fine) {
    return Metric2{(4.0 * fine.g_pp - coarse.g_pp) / 3.0, (4.0 * fine.g_pq - coarse.g_pq) / 3.0,
                   (4.0 * fine.g_qq - coarse.g_qq) / 3.0};
  };
  const Metric2 r1 = extrapolate(g[0], g[1]);
  const Metric2 r2 = extrapolate(g[1], g[2]);
  const double scale = std::max({1.0, std::abs(r2.g_pp), std::abs(r2.g_qq), std::abs(r2.g_pq)});
  const double gap = std::max({std::abs(r1.g_pp - r2.g_pp), std::abs(r1.g_pq - r2.g_pq),
                               std::abs(r1.g_qq - r2.g_qq)});
  if (!std::isfinite(gap) || gap > rtol * scale) {
    std::ostringstream os;
    os << "fs_metric_numeric: Richardson sequence not converged at (" << p << "," << q
       << "), h=" << h << ": extrapolants (" << r1.g_pp << "," << r1.g_pq << "," << r1.g_qq
       << ") vs (" << r2.g_pp << "," << r2.g_pq << "," << r2.g_qq << "), gap " << gap;
    throw NumericalFailure(os.str());
  }
  return r2;
}

Metric2 fs_metric_numeric(const CoherentFamily& family, double p, double q, double h) {
  const double reach = 2.0 * h;  // widest stencil offset is h
  bool interior = family.in_domain(p, q);
  switch (family.kind()) {
    case FamilyKind::affine: interior = interior && q - reach > 0.0; break;
    case FamilyKind::spin: {
      const double r = std::sqrt(family.params().s * family.hbar());
      interior = interior && std::abs(p) + reach < r;
      break;
    }
    default: break;
  }
  if (!interior) {
    throw DomainViolation("fs_metric_numeric: label (" + fmt(p) + "," + fmt(q) +
                          ") not interior to the " + to_string(family.kind()) + " label domain");
  }
  return fs_metric_numeric(
      [&family](double pp, double qq) { return family.state_unchecked(pp, qq); }, p, q, h,
      family.hbar());
}

Metric2 fs_metric_analytic(FamilyKind kind, const FamilyParams& params, double p, double q) {
  if (!std::isfinite(p) || !std::isfinite(q)) throw DomainViolation("non-finite label");
  switch (kind) {
    case FamilyKind::canonical:
    case FamilyKind::extended: return {1.0, 0.0, 1.0};
    case FamilyKind::affine:
      if (!(q > 0.0)) throw DomainViolation("affine metric: q must be > 0");
      if (!(params.beta > 0.0)) throw InvalidArgument("affine metric: beta must be > 0");
      return {q * q / params.beta, 0.0, params.beta / (q * q)};
    case FamilyKind::spin: {
      const double sh = params.s * params.hbar;
      if (!(sh > 0.0)) throw InvalidArgument("spin metric: s hbar must be > 0");
      const double c = 1.0 - p * p / sh;
      if (!(c > 0.0)) throw DomainViolation("spin metric: need p^2 < s hbar (chart pole)");
      return {1.0 / c, 0.0, c};
    }
  }
  throw InvalidArgument("unknown family kind");
}

namespace {

struct SecondOrderDerivs {
  double fu = 0, fv = 0, fuu = 0, fvv = 0, fuv = 0;
};

template <typename F>
SecondOrderDerivs central_derivs(const F& f, double u, double v, double h) {
  SecondOrderDerivs d;
  const double f0 = f(u, v);
  const double fup = f(u + h, v), fum = f(u - h, v);
  const double fvp = f(u, v + h), fvm = f(u, v - h);
  d.fu = (fup - fum) / (2 * h);
  d.fv = (fvp - fvm) / (2 * h);
  d.fuu = (fup - 2 * f0 + fum) / (h * h);
  d.fvv = (fvp - 2 * f0 + fvm) / (h * h);
  d.fuv = (f(u + h, v + h) - f(u + h, v - h) - f(u - h, v + h) + f(u - h, v - h)) / (4 * h * h);
  return d;
}

template <typename F>
SecondOrderDerivs richardson_derivs(const F& f, double u, double v, double h) {
  const auto a = central_derivs(f, u, v, h);
  const auto b = central_derivs(f, u, v, h / 2);
  const auto r = [](double coarse, double fine) { return (4 * fine - coarse) / 3; };
  return {r(a.fu, b.fu), r(a.fv, b.fv), r(a.fuu, b.fuu), r(a.fvv, b.fvv), r(a.fuv, b.fuv)};
}

}  // namespace

double scalar_curvature(FamilyKind kind, const FamilyParams& params, double p, double q) {
  const Metric2 g = fs_metric_analytic(kind, params, p, q);
  double h = 1e-3;
  if (kind == FamilyKind::affine) h = std::min(h, 0.1 * q);
  if (kind == FamilyKind::spin) {
    const double r = std::sqrt(params.s * params.hbar);
    h = std::min(h, 0.1 * (r - std::abs(p)));
  }
  // Every stencil point must stay in the chart.
  fs_metric_analytic(kind, params, p + h, q + h);
  fs_metric_analytic(kind, params, p - h, q - h);

  const auto comp = [&](int which) {
    return [&, which](double u, double v) {
      const Metric2 m = fs_metric_analytic(kind, params, u, v);
      return which == 0 ? m.g_pp : (which == 1 ? m.g_pq : m.g_qq);
    };
  };
  const auto E = richardson_derivs(comp(0), p, q, h);
  const auto F = richardson_derivs(comp(1), p, q, h);
  const auto G = richardson_derivs(comp(2), p, q, h);

  Eigen::Matrix3d m1, m2;
  m1 << -0.5 * E.fvv + F.fuv - 0.5 * G.fuu, 0.5 * E.fu, F.fu - 0.5 * E.fv,
      F.fv - 0.5 * G.fu, g.g_pp, g.g_pq,
      0.5 * G.fv, g.g_pq, g.g_qq;
  m2 << 0.0, 0.5 * E.fv, 0.5 * G.fu,
      0.5 * E.fv, g.g_pp, g.g_pq,
      0.5 * G.fu, g.g_pq, g.g_qq;
  const double det = g.determinant();
  const double gaussian = (m1.determinant() - m2.determinant()) / (det * det);
  return 2.0 * gaussian;
}

HalfLineGrid recommended_halfline_grid(double beta, double hbar, double q_lo, double q_hi,
                                       double p_max) {
  require_positive_hbar(hbar);
  if (!(beta > 0.0)) throw InvalidArgument("recommended_halfline_grid: beta must be > 0");
  if (!(q_lo > 0.0 && q_hi >= q_lo)) throw InvalidArgument("recommended_halfline_grid: bad q range");
  const double k = 2.0 * beta / hbar;
  // Left tail of |P psi|^2 ~ x^{k-2}; of |psi|^2 ~ x^k.
  const double decay = (k - 2.0 >= 0.5) ? k - 2.0 : k;
  // P carries a 1/x, so spectral roundoff near x_min is amplified by e^{-u}:
  // balance that against the truncated tail.
  const double u_min =
      std::max({-37.0 / decay, -73.7 / (decay + 2.0), -80.0}) + std::log(q_lo) - 1.0;
  // Right tail ~ x^k e^{-k x}.
  double x_r = 2.0;
  while (k * (x_r - 1.0 - std::log(x_r)) < 40.0) x_r *= 1.05;
  const double u_max = std::log(x_r) + std::log(q_hi) + 0.5;
  // e^{ipx} oscillates at p x / hbar per unit u; cover it out to where |psi|^2 ~ e^{-30}.
  double x_p = 2.0;
  while (k * (x_p - 1.0 - std::log(x_p)) < 30.0) x_p *= 1.05;
  const double omega = 25.0 + 1.5 * (k - 1.0) + 1.1 * std::abs(p_max) * q_hi * x_p / hbar;
  const double du = std::min(0.1, kPi / omega);
  Eigen::Index n = static_cast<Eigen::Index>(std::ceil((u_max - u_min) / du)) + 1;
  if (n % 2 == 0) ++n;
  n = std::max<Eigen::Index>(n, 17);
  return {std::exp(u_min), std::exp(u_max), n};
}

}  // namespace eq
