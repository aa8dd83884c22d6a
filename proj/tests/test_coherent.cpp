#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "eq/coherent.hpp"
#include "oracles.hpp"

using namespace eq;

namespace {

std::shared_ptr<const LineRep> fock(Eigen::Index dim, double hbar = 1.0) {
  return std::make_shared<const LineRep>(build_fock_rep(dim, hbar));
}

std::shared_ptr<const HalfLineRep> halfline(double beta, double hbar, double q_lo = 0.25,
                                            double q_hi = 4.0, double p_max = 2.0) {
  const HalfLineGrid g = recommended_halfline_grid(beta, hbar, q_lo, q_hi, p_max);
  return std::make_shared<const HalfLineRep>(build_halfline_rep(g.x_min, g.x_max, g.n, hbar));
}

std::shared_ptr<const SpinRep> spin(double s, double hbar = 1.0) {
  return std::make_shared<const SpinRep>(build_spin_rep(s, hbar));
}

double fidelity(const Vector& a, const Vector& b) { return std::abs(a.dot(b)); }

}  // namespace

// ---------------------------------------------------------------------------
// canonical

TEST_CASE("canonical: origin is the vacuum") {
  const auto rep = fock(60);
  const CoherentFamily fam = canonical_family(rep);
  CHECK((fam.state(0, 0).amplitudes() - fock_state(*rep, 0).amplitudes()).norm() < 1e-14);
  CHECK(fam.fiducial_residual() < 1e-14);
}

TEST_CASE("canonical: amplitudes and phase match the Poisson oracle") {
  const auto rep = fock(200);
  for (auto [p, q] : {std::pair{1.0, 2.0}, {-2.5, 0.7}, {0.0, -3.0}}) {
    const Vector c = canonical_cs(p, q, *rep).amplitudes();
    const auto ref = oracle::canonical_amplitudes(p, q, 1.0, 200);
    double err = 0.0;
    for (int n = 0; n < 200; ++n) err = std::max(err, std::abs(c(n) - ref[n]));
    CAPTURE(p);
    CAPTURE(q);
    CHECK(err < 1e-12);
  }
}

TEST_CASE("canonical: label means and minimal spread at (1,2)") {
  const auto rep = fock(200);
  const StateVector s = canonical_cs(1.0, 2.0, *rep);
  CHECK(std::abs(expectation(s, rep->Q).real() - 2.0) < 1e-8);
  CHECK(std::abs(expectation(s, rep->P).real() - 1.0) < 1e-8);
  CHECK(std::abs(variance(s, rep->Q) - 0.5) < 1e-8);
  CHECK(std::abs(variance(s, rep->P) - 0.5) < 1e-8);
}

TEST_CASE("canonical: means over a random label set, small hbar") {
  const double hbar = 0.1;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const auto rep = fock(required_fock_dim(1.5, 1.5, hbar), hbar);
  for (int k = 0; k < 20; ++k) {
    const double p = u(rng), q = u(rng);
    const StateVector s = canonical_cs(p, q, *rep);
    CHECK(std::abs(expectation(s, rep->P).real() - p) < 1e-8);
    CHECK(std::abs(expectation(s, rep->Q).real() - q) < 1e-8);
    CHECK(std::abs(variance(s, rep->Q) - hbar / 2) < 1e-8);
  }
}

TEST_CASE("canonical: truncation guard") {
  const auto rep = fock(40);
  CHECK_THROWS_AS(canonical_cs(5.0, 5.0, *rep), CapacityError);
  try {
    canonical_cs(5.0, 5.0, *rep);
  } catch (const CapacityError& e) {
    CHECK(e.required_dim() > 40);
    CHECK(e.required_dim() == required_fock_dim(5.0, 5.0, 1.0));
  }
  // the estimate is sufficient
  const auto big = fock(required_fock_dim(5.0, 5.0, 1.0));
  CHECK_NOTHROW(canonical_cs(5.0, 5.0, *big));
}

// ---------------------------------------------------------------------------
// affine

TEST_CASE("affine fiducial: Gamma moments") {
  for (double beta : {2.0, 3.0, 5.0}) {
    const auto rep = halfline(beta, 1.0, 1.0, 1.0, 0.0);
    const StateVector f = affine_fiducial(beta, *rep);
    const Vector& c = f.amplitudes();
    CAPTURE(beta);
    CHECK(std::abs(expectation(f, rep->Q()).real() - 1.0) < 1e-10);
    CHECK(std::abs(expectation(f, rep->D)) < 1e-10);
    for (int n : {2, 3, 4, -1}) {
      const double m = (c.array().abs2() * rep->x.array().pow(n)).sum();
      CHECK(m == doctest::Approx(oracle::gamma_moment(beta, 1.0, n)).epsilon(1e-10));
    }
    CHECK(oracle::gamma_moment(beta, 1.0, 2) == doctest::Approx(1.0 + 1.0 / (2 * beta)));
  }
}

TEST_CASE("affine fiducial: C2 against quadrature and closed form") {
  for (auto [beta, hbar] : {std::pair{2.0, 1.0}, {1.5, 1.0}, {5.0, 1.0}, {1.0, 0.5}, {0.5, 0.25}}) {
    const auto rep = halfline(beta, hbar, 1.0, 1.0, 0.0);
    const Vector c = affine_fiducial(beta, *rep).amplitudes();
    const double measured = (rep->P_formal * c).squaredNorm();
    const double quad = oracle::fiducial_p2_quadrature(beta, hbar);
    const double closed = beta * beta * hbar / (2 * (beta - hbar));
    CAPTURE(beta);
    CAPTURE(hbar);
    CHECK(quad == doctest::Approx(closed).epsilon(1e-10));
    CHECK(std::abs(measured - closed) / closed < 1e-5);
  }
}

TEST_CASE("affine fiducial: beta <= hbar is rejected") {
  const auto rep = halfline(2.0, 1.0, 1.0, 1.0, 0.0);
  CHECK_THROWS_AS(affine_fiducial(1.0, *rep), DomainViolation);
  CHECK_THROWS_AS(affine_fiducial(0.5, *rep), DomainViolation);
  CHECK_THROWS_AS(affine_family(rep, 1.0), DomainViolation);
}

TEST_CASE("affine states: fiducial at (0,1), dilation covariance, momentum spread") {
  const double beta = 2.0;
  const auto rep = halfline(beta, 1.0, 0.5, 2.5, 1.5);
  const CoherentFamily fam = affine_family(rep, beta);
  CHECK(fidelity(fam.state(0, 1).amplitudes(), fam.fiducial().amplitudes()) ==
        doctest::Approx(1.0).epsilon(1e-14));
  CHECK(fam.fiducial_residual() < 1e-6);

  const double C2 = beta * beta / (2 * (beta - 1.0));
  for (auto [p, q] : {std::pair{0.5, 0.7}, {-1.0, 1.6}, {1.5, 2.5}}) {
    const Vector c = fam.state(p, q).amplitudes();
    CAPTURE(p);
    CAPTURE(q);
    for (int n = 1; n <= 4; ++n) {
      const double m = (c.array().abs2() * rep->x.array().pow(n)).sum();
      const double want = std::pow(q, n) * oracle::gamma_moment(beta, 1.0, n);
      CHECK(std::abs(m - want) / want < 1e-7);
    }
    const Vector Pc = rep->P_formal * c;
    CHECK(std::abs(c.dot(Pc).real() - p) < 1e-6);
    CHECK(std::abs(Pc.squaredNorm() - (p * p + C2 / (q * q))) / (p * p + C2 / (q * q)) < 1e-5);
  }
}

TEST_CASE("affine states: q <= 0 is outside the domain") {
  const auto rep = halfline(2.0, 1.0, 1.0, 1.0, 0.0);
  const CoherentFamily fam = affine_family(rep, 2.0);
  CHECK_THROWS_AS(fam.state(0.0, 0.0), DomainViolation);
  CHECK_THROWS_AS(fam.state(0.3, -1.0), DomainViolation);
  CHECK_FALSE(fam.in_domain(0.0, -0.1));
}

// ---------------------------------------------------------------------------
// spin

TEST_CASE("spin states: north pole, oracle amplitudes, S3 mean") {
  for (double s : {0.5, 1.0, 2.5, 5.0}) {
    const auto rep = spin(s);
    CHECK((spin_cs(0, 0, *rep).amplitudes() - spin_basis_state(*rep, s).amplitudes()).norm() <
          1e-15);
    for (auto [th, ph] : {std::pair{0.4, 0.3}, {1.9, -2.2}, {2.8, 3.0}}) {
      const Vector c = spin_cs(th, ph, *rep).amplitudes();
      const auto ref = oracle::spin_amplitudes(th, ph, rep->two_s);
      Vector r(rep->dim());
      for (Eigen::Index i = 0; i < rep->dim(); ++i) r(i) = ref[i];
      CAPTURE(s);
      CHECK(fidelity(c, r) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(expectation(StateVector::normalized(c), rep->S3).real() ==
            doctest::Approx(s * std::cos(th)).epsilon(1e-12));
    }
  }
}

TEST_CASE("spin states: half-spin south pole and label maps") {
  const auto rep = spin(0.5);
  const Vector south = spin_cs(std::numbers::pi, 0.0, *rep).amplitudes();
  CHECK(fidelity(south, spin_basis_state(*rep, -0.5).amplitudes()) ==
        doctest::Approx(1.0).epsilon(1e-14));

  const double s = 3.0, hbar = 0.5;
  const SpinAngles a = pq_to_angles(0.4, -1.1, s, hbar);
  const auto [p, q] = angles_to_pq(a.theta, a.phi, s, hbar);
  CHECK(p == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(q == doctest::Approx(-1.1).epsilon(1e-14));
  CHECK(std::sqrt(s * hbar) * std::cos(a.theta) == doctest::Approx(0.4));

  CHECK_THROWS_AS(pq_to_angles(2.0, 0.0, s, hbar), DomainViolation);
  CHECK_THROWS_AS(spin_cs(-0.1, 0.0, *rep), DomainViolation);
  CHECK_THROWS_AS(spin_cs(0.5, 4.0, *rep), DomainViolation);
}

TEST_CASE("spin family: fiducial is extremal") {
  const CoherentFamily fam = spin_family(spin(4.5));
  CHECK(fam.fiducial_residual() < 1e-14);
}

// ---------------------------------------------------------------------------
// extended

TEST_CASE("extended: reduces to canonical, phase-only change at the origin") {
  const auto rep = fock(160);
  const Vector c = canonical_cs(0.8, -0.6, *rep).amplitudes();
  CHECK((extended_cs(0.8, -0.6, 0.0, 0.0, *rep).amplitudes() - c).norm() < 1e-12);

  const Vector e = extended_cs(0.0, 0.0, 0.7, 0.0, *rep).amplitudes();
  CHECK(fidelity(e, fock_state(*rep, 0).amplitudes()) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("extended: uncertainty product under squeezing") {
  const auto rep = fock(160);
  const auto product = [&](double a, double b) {
    const StateVector s = extended_cs(0.0, 0.0, a, b, *rep);
    return variance(s, rep->Q) * variance(s, rep->P);
  };
  // pure squeeze keeps minimum uncertainty; a rotation of the squeezed ellipse does not
  CHECK(product(0.0, 0.1) == doctest::Approx(0.25).epsilon(1e-10));
  CHECK(product(0.3, 0.1) > 0.25 + 1e-3);
  CHECK(product(0.0, 0.0) == doctest::Approx(0.25).epsilon(1e-12));

  const StateVector sq = extended_cs(0.0, 0.0, 0.0, 0.1, *rep);
  CHECK(variance(sq, rep->Q) != doctest::Approx(0.5));
}

TEST_CASE("extended: capacity guard") {
  const auto rep = fock(30);
  CHECK_THROWS_AS(extended_cs(0.0, 0.0, 0.0, 1.5, *rep), CapacityError);
}

// ---------------------------------------------------------------------------
// overlaps

TEST_CASE("overlaps: normalization, Gaussian decay, conjugate symmetry") {
  const auto rep = fock(150);
  const StateVector vac = canonical_cs(0, 0, *rep);
  for (auto [p, q] : {std::pair{1.0, 0.5}, {-2.0, 1.0}}) {
    const StateVector s = canonical_cs(p, q, *rep);
    CHECK(std::abs(overlap(s, s) - 1.0) < 1e-14);
    CHECK(std::norm(overlap(vac, s)) == doctest::Approx(std::exp(-(p * p + q * q) / 2)).epsilon(1e-12));
    CHECK(std::abs(overlap(vac, s) - std::conj(overlap(s, vac))) < 1e-15);
  }
  const auto half = spin(0.5);
  const StateVector north = spin_cs(0, 0, *half);
  for (double th : {0.3, 1.2, 2.9}) {
    CHECK(std::norm(overlap(north, spin_cs(th, 0, *half))) ==
          doctest::Approx(std::pow(std::cos(th / 2), 2)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(overlap(vac, north), InvalidArgument);
}

TEST_CASE("overlaps: continuity in the labels") {
  const auto rep = fock(120);
  const StateVector s = canonical_cs(1.0, 1.0, *rep);
  double prev = 1.0;
  for (double d : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const double gap = std::abs(overlap(s, canonical_cs(1.0 + d, 1.0, *rep)) - 1.0);
    CHECK(gap < prev);
    prev = gap;
  }
  CHECK(prev < 1e-8);
}

// ---------------------------------------------------------------------------
// metrics

TEST_CASE("metric: canonical sheet is flat") {
  const auto rep = fock(required_fock_dim(3.1, 3.1, 1.0));
  const CoherentFamily fam = canonical_family(rep);
  for (double p : {-3.0, 0.0, 2.0}) {
    for (double q : {-2.0, 1.0, 3.0}) {
      const Metric2 g = fs_metric_numeric(fam, p, q);
      CHECK(std::abs(g.g_pp - 1.0) < 1e-6);
      CHECK(std::abs(g.g_qq - 1.0) < 1e-6);
      CHECK(std::abs(g.g_pq) < 1e-6);
    }
  }
}

TEST_CASE("metric: affine sheet matches diag(q^2/beta, beta/q^2)") {
  for (auto [beta, hbar] : {std::pair{2.0, 1.0}, {5.0, 1.0}, {1.0, 0.5}}) {
    const auto rep = halfline(beta, hbar, 0.4, 2.5, 1.1);
    const CoherentFamily fam = affine_family(rep, beta);
    for (double p : {-1.0, 0.0, 1.0}) {
      for (double q : {0.5, 1.0, 2.0}) {
        const Metric2 g = fs_metric_numeric(fam, p, q);
        const Metric2 ref = fs_metric_analytic(FamilyKind::affine, {hbar, beta}, p, q);
        CAPTURE(beta);
        CAPTURE(hbar);
        CHECK(ref.g_pp == doctest::Approx(q * q / beta));
        CHECK(ref.g_qq == doctest::Approx(beta / (q * q)));
        CHECK(std::abs(g.g_pp - ref.g_pp) / ref.g_pp < 1e-5);
        CHECK(std::abs(g.g_qq - ref.g_qq) / ref.g_qq < 1e-5);
        CHECK(std::abs(g.g_pq) < 1e-5);
      }
    }
  }
}

TEST_CASE("metric: spin sheet matches the sphere in (p,q)") {
  for (double s : {0.5, 1.0, 5.0}) {
    const CoherentFamily fam = spin_family(spin(s));
    const double r = std::sqrt(s);
    for (double fp : {-0.6, 0.0, 0.45}) {
      for (double q : {-0.5 * r, 0.2, r}) {
        const double p = fp * r;
        const Metric2 g = fs_metric_numeric(fam, p, q);
        const double c = 1.0 - p * p / s;
        CAPTURE(s);
        CAPTURE(p);
        CHECK(std::abs(g.g_pp - 1.0 / c) < 1e-6);
        CHECK(std::abs(g.g_qq - c) < 1e-6);
        CHECK(std::abs(g.g_pq) < 1e-6);
      }
    }
  }
}

TEST_CASE("metric: phase invariance of the state map") {
  const auto rep = fock(80);
  const StateMap plain = [&](double p, double q) { return canonical_cs(p, q, *rep); };
  const StateMap phased = [&](double p, double q) {
    return StateVector::normalized(canonical_cs(p, q, *rep).amplitudes() *
                                   std::exp(cplx(0.0, p * q / 2)));
  };
  const Metric2 a = fs_metric_numeric(plain, 0.7, -0.4, 1e-3, 1.0);
  const Metric2 b = fs_metric_numeric(phased, 0.7, -0.4, 1e-3, 1.0);
  CHECK(std::abs(a.g_pp - b.g_pp) < 1e-9);
  CHECK(std::abs(a.g_pq - b.g_pq) < 1e-9);
  CHECK(std::abs(a.g_qq - b.g_qq) < 1e-9);
}

TEST_CASE("metric: central differences converge at second order") {
  const auto srep = spin(2.0);
  const auto arep = halfline(2.0, 1.0, 1.0, 1.5, 0.5);
  const CoherentFamily sf = spin_family(srep), af = affine_family(arep, 2.0);
  const auto cf = canonical_family(fock(80));
  struct Case {
    const CoherentFamily* fam;
    double p, q;
  };
  for (const Case& k : {Case{&sf, 0.5, 0.3}, Case{&af, 0.4, 1.3}, Case{&cf, 0.5, -0.5}}) {
    const StateMap m = [&](double p, double q) { return k.fam->state_unchecked(p, q); };
    const Metric2 ref = fs_metric_analytic(k.fam->kind(), k.fam->params(), k.p, k.q);
    const double h = 0.02;
    const double e1 = std::abs(fs_metric_central(m, k.p, k.q, h, 1.0).g_qq - ref.g_qq);
    const double e2 = std::abs(fs_metric_central(m, k.p, k.q, h / 2, 1.0).g_qq - ref.g_qq);
    CAPTURE(to_string(k.fam->kind()));
    if (e1 > 1e-10) CHECK(std::log2(e1 / e2) > 1.8);
  }
}

TEST_CASE("metric: positive definite and domain checks") {
  const Metric2 g = fs_metric_analytic(FamilyKind::spin, {1.0, 0.0, 2.0}, 0.5, 0.1);
  CHECK(g.positive_definite());
  CHECK(g.determinant() == doctest::Approx(1.0));
  CHECK_THROWS_AS(fs_metric_analytic(FamilyKind::affine, {1.0, 2.0}, 0.0, -1.0), DomainViolation);
  CHECK_THROWS_AS(fs_metric_analytic(FamilyKind::spin, {1.0, 0.0, 2.0}, 2.0, 0.0), DomainViolation);
}

TEST_CASE("curvature: flat, hyperbolic, spherical") {
  CHECK(std::abs(scalar_curvature(FamilyKind::canonical, {1.0}, 0.3, -0.2)) < 1e-8);
  for (double beta : {1.0, 2.0, 5.0}) {
    for (double q : {0.5, 1.0, 2.0}) {
      CHECK(std::abs(scalar_curvature(FamilyKind::affine, {1.0, beta}, 0.2, q) + 2.0 / beta) < 1e-6);
    }
  }
  CHECK(std::abs(scalar_curvature(FamilyKind::spin, {1.0, 0.0, 2.0}, 0.3, 0.7) - 1.0) < 1e-6);
  for (double s : {0.5, 1.0, 5.0}) {
    const double p = 0.3 * std::sqrt(s);
    CHECK(std::abs(scalar_curvature(FamilyKind::spin, {1.0, 0.0, s}, p, 0.1) - 2.0 / s) < 1e-6);
  }
}

TEST_CASE("curvature: agrees with the closed-form Brioschi oracle") {
  // affine: E = q^2/b, G = b/q^2
  const double b = 3.0, q = 1.4;
  const double K_aff = oracle::diagonal_metric_curvature(q * q / b, 2 * q / b, 2 / b, b / (q * q),
                                                         -2 * b / (q * q * q));
  CHECK(scalar_curvature(FamilyKind::affine, {1.0, b}, 0.0, q) == doctest::Approx(2 * K_aff).epsilon(1e-6));
}
