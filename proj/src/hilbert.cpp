#include "eq/hilbert.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace eq {

StateVector StateVector::normalized(Vector amplitudes) {
  const double n = amplitudes.norm();
  if (!std::isfinite(n) || n == 0.0) {
    throw NumericalFailure("StateVector: cannot normalize a zero or non-finite vector");
  }
  amplitudes /= n;
  return StateVector(std::move(amplitudes));
}

double hermiticity_defect(const Matrix& a) {
  const double scale = a.norm();
  if (scale == 0.0) return 0.0;
  return (a - a.adjoint()).norm() / scale;
}

UnitaryGenerator UnitaryGenerator::from_hermitian(const Matrix& op, double hbar) {
  if (op.rows() != op.cols()) throw InvalidArgument("generator must be square");
  const double defect = hermiticity_defect(op);
  if (defect > kHermitianTolerance) {
    throw InvalidArgument("generator is not Hermitian (relative defect " + std::to_string(defect) +
                          ")");
  }
  const Matrix sym = 0.5 * (op + op.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) throw NumericalFailure("generator eigen-decomposition failed");
  UnitaryGenerator g;
  g.eigenvalues_ = es.eigenvalues();
  g.eigenvectors_ = es.eigenvectors();
  g.hbar_ = hbar;
  return g;
}

UnitaryGenerator UnitaryGenerator::from_diagonal(RealVector eigenvalues, double hbar) {
  UnitaryGenerator g;
  g.eigenvalues_ = std::move(eigenvalues);
  g.diagonal_ = true;
  g.hbar_ = hbar;
  return g;
}

UnitaryGenerator UnitaryGenerator::from_eigensystem(RealVector eigenvalues, Matrix eigenvectors,
                                                    double hbar) {
  if (eigenvectors.rows() != eigenvalues.size() || eigenvectors.cols() != eigenvalues.size()) {
    throw InvalidArgument("eigensystem shape mismatch");
  }
  UnitaryGenerator g;
  g.eigenvalues_ = std::move(eigenvalues);
  g.eigenvectors_ = std::move(eigenvectors);
  g.hbar_ = hbar;
  return g;
}

Vector UnitaryGenerator::apply(double theta, const Vector& v) const {
  if (v.size() != dim()) throw InvalidArgument("generator/state dimension mismatch");
  const double rate = -theta / hbar_;
  Vector phases(dim());
  for (Eigen::Index k = 0; k < dim(); ++k) phases(k) = std::polar(1.0, rate * eigenvalues_(k));
  if (diagonal_) return phases.cwiseProduct(v);
  Vector coeff = eigenvectors_.adjoint() * v;
  return eigenvectors_ * phases.cwiseProduct(coeff);
}

StateVector UnitaryGenerator::apply(double theta, const StateVector& s) const {
  return StateVector::normalized(apply(theta, s.amplitudes()));
}

LineRep build_fock_rep(Eigen::Index dim, double hbar) {
  if (dim < 2) throw InvalidArgument("build_fock_rep: dim must be >= 2, got " + std::to_string(dim));
  if (!(hbar > 0.0)) throw InvalidArgument("build_fock_rep: hbar must be positive");

  Matrix lower = Matrix::Zero(dim, dim);
  for (Eigen::Index n = 1; n < dim; ++n) lower(n - 1, n) = std::sqrt(static_cast<double>(n));
  const double c = std::sqrt(hbar / 2.0);
  const cplx i(0.0, 1.0);

  LineRep rep;
  rep.dim = dim;
  rep.hbar = hbar;
  rep.Q = c * (lower + lower.adjoint());
  rep.P = i * c * (lower.adjoint() - lower);
  rep.D = 0.5 * (rep.P * rep.Q + rep.Q * rep.P);
  rep.Q_gen = UnitaryGenerator::from_hermitian(rep.Q, hbar);
  rep.P_gen = UnitaryGenerator::from_hermitian(rep.P, hbar);
  return rep;
}

double commutator_defect(const LineRep& rep, Eigen::Index margin) {
  const Eigen::Index k = rep.dim - margin;
  if (k <= 0) throw InvalidArgument("commutator_defect: margin leaves no states");
  const Matrix comm = rep.Q * rep.P - rep.P * rep.Q;
  const Matrix target = cplx(0.0, rep.hbar) * Matrix::Identity(k, k);
  return (comm.topLeftCorner(k, k) - target).norm();
}

namespace {

// Periodic Fourier differentiation matrix on n equispaced points with period L.
Eigen::MatrixXd spectral_derivative(Eigen::Index n, double period) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  const double pi = std::numbers::pi;
  const bool odd = (n % 2) == 1;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index l = 0; l < n; ++l) {
      if (j == l) continue;
      const Eigen::Index k = j - l;
      const double sign = (k % 2 == 0) ? 1.0 : -1.0;
      const double arg = pi * static_cast<double>(k) / static_cast<double>(n);
      d(j, l) = (pi / period) * sign * (odd ? 1.0 / std::sin(arg) : std::cos(arg) / std::sin(arg));
    }
  }
  return d;
}

// Eigenbasis of the spectral derivative: DFT columns with wavenumbers 2 pi m / L.
// For even n the Nyquist column has eigenvalue 0.
void spectral_eigensystem(Eigen::Index n, double period, double hbar, RealVector& values,
                          Matrix& vectors) {
  values.resize(n);
  vectors.resize(n, n);
  const double pi = std::numbers::pi;
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index col = 0; col < n; ++col) {
    // col -> signed mode index in (-n/2, n/2]
    const Eigen::Index m = (col <= n / 2) ? col : col - n;
    const bool nyquist = (n % 2 == 0) && (m == n / 2);
    values(col) = nyquist ? 0.0 : hbar * 2.0 * pi * static_cast<double>(m) / period;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double phase = 2.0 * pi * static_cast<double>(m * j % n) / static_cast<double>(n);
      vectors(j, col) = std::polar(inv_sqrt_n, phase);
    }
  }
}

// Fourth-order antisymmetric central difference for d/dx with zero exterior values.
Eigen::MatrixXd central_difference(Eigen::Index n, double h) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j + 1 < n) d(j, j + 1) = 8.0 / (12.0 * h);
    if (j - 1 >= 0) d(j, j - 1) = -8.0 / (12.0 * h);
    if (j + 2 < n) d(j, j + 2) = -1.0 / (12.0 * h);
    if (j - 2 >= 0) d(j, j - 2) = 1.0 / (12.0 * h);
  }
  return d;
}

}  // namespace

HalfLineRep build_halfline_rep(double x_min, double x_max, Eigen::Index n, double hbar,
                               GridSpacing spacing) {
  if (!(x_min > 0.0)) {
    throw DomainViolation("build_halfline_rep: x_min must be > 0 (Q > 0 sector), got " +
                          std::to_string(x_min));
  }
  if (!(x_max > x_min)) throw InvalidArgument("build_halfline_rep: need x_min < x_max");
  if (n < 16) throw InvalidArgument("build_halfline_rep: n must be >= 16, got " + std::to_string(n));
  if (!(hbar > 0.0)) throw InvalidArgument("build_halfline_rep: hbar must be positive");

  const cplx i(0.0, 1.0);
  HalfLineRep rep;
  rep.spacing = spacing;
  rep.hbar = hbar;
  rep.x.resize(n);
  rep.weights.resize(n);

  if (spacing == GridSpacing::logarithmic) {
    const double u0 = std::log(x_min);
    const double du = (std::log(x_max) - u0) / static_cast<double>(n - 1);
    for (Eigen::Index j = 0; j < n; ++j) {
      rep.x(j) = std::exp(u0 + du * static_cast<double>(j));
      rep.weights(j) = du * rep.x(j);
    }
    const double period = du * static_cast<double>(n);
    // On x^{1/2} psi(e^u), D = -i hbar (x d/dx + 1/2) is -i hbar d/du.
    rep.D = (-i * hbar) * spectral_derivative(n, period).cast<cplx>();
    RealVector values;
    Matrix vectors;
    spectral_eigensystem(n, period, hbar, values, vectors);
    rep.D_gen = UnitaryGenerator::from_eigensystem(std::move(values), std::move(vectors), hbar);
  } else {
    const double h = (x_max - x_min) / static_cast<double>(n - 1);
    for (Eigen::Index j = 0; j < n; ++j) {
      rep.x(j) = x_min + h * static_cast<double>(j);
      rep.weights(j) = h;
    }
    const Eigen::MatrixXd dx = central_difference(n, h);
    const Eigen::MatrixXd xd = rep.x.asDiagonal() * dx;
    rep.D = (-0.5 * i * hbar) * (xd - xd.transpose()).cast<cplx>();
    rep.D_gen = UnitaryGenerator::from_hermitian(rep.D, hbar);
  }

  const Matrix inv_x = rep.x.cwiseInverse().cast<cplx>().asDiagonal();
  rep.P_formal = 0.5 * (inv_x * rep.D + rep.D * inv_x);
  rep.Q_gen = UnitaryGenerator::from_diagonal(rep.x, hbar);
  return rep;
}

SpinRep build_spin_rep(double s, double hbar) {
  const double twice = 2.0 * s;
  const double rounded = std::round(twice);
  if (!(s > 0.0) || std::abs(twice - rounded) > 1e-12) {
    throw InvalidArgument("build_spin_rep: 2s must be a positive integer, got s=" +
                          std::to_string(s));
  }
  if (!(hbar > 0.0)) throw InvalidArgument("build_spin_rep: hbar must be positive");

  SpinRep rep;
  rep.two_s = static_cast<int>(rounded);
  rep.hbar = hbar;
  const Eigen::Index dim = rep.dim();
  const double ss = rep.s();

  Matrix raise = Matrix::Zero(dim, dim);
  rep.S3 = Matrix::Zero(dim, dim);
  for (Eigen::Index idx = 0; idx < dim; ++idx) {
    const double m = ss - static_cast<double>(idx);
    rep.S3(idx, idx) = hbar * m;
    if (idx > 0) raise(idx - 1, idx) = hbar * std::sqrt(ss * (ss + 1.0) - m * (m + 1.0));
  }
  const Matrix lower = raise.adjoint();
  rep.S1 = 0.5 * (raise + lower);
  rep.S2 = cplx(0.0, -0.5) * (raise - lower);
  rep.S2_gen = UnitaryGenerator::from_hermitian(rep.S2, hbar);
  rep.S3_gen = UnitaryGenerator::from_diagonal(rep.S3.diagonal().real(), hbar);
  return rep;
}

StateVector fock_state(const LineRep& rep, Eigen::Index n) {
  if (n < 0 || n >= rep.dim) throw InvalidArgument("fock_state: level out of range");
  Vector v = Vector::Zero(rep.dim);
  v(n) = 1.0;
  return StateVector::normalized(std::move(v));
}

StateVector spin_basis_state(const SpinRep& rep, double m) {
  const double idx = rep.s() - m;
  const double rounded = std::round(idx);
  if (std::abs(idx - rounded) > 1e-12 || rounded < 0 || rounded > rep.two_s) {
    throw InvalidArgument("spin_basis_state: m out of range");
  }
  Vector v = Vector::Zero(rep.dim());
  v(static_cast<Eigen::Index>(rounded)) = 1.0;
  return StateVector::normalized(std::move(v));
}

StateVector apply_unitary(const Matrix& op, double theta, const StateVector& state, double hbar) {
  if (op.rows() != state.dim() || op.cols() != state.dim()) {
    throw InvalidArgument("apply_unitary: operator/state dimension mismatch");
  }
  return UnitaryGenerator::from_hermitian(op, hbar).apply(theta, state);
}

double variance(const StateVector& state, const Matrix& op) {
  const Vector a = op * state.amplitudes();
  const double mean = state.amplitudes().dot(a).real();
  return a.squaredNorm() - mean * mean;
}

}  // namespace eq
