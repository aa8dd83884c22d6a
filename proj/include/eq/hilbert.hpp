#pragma once

#include <complex>
#include <memory>

#include <Eigen/Dense>

#include "eq/errors.hpp"

namespace eq {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

/// Relative Frobenius tolerance below which a nearly Hermitian matrix is
/// symmetrized instead of rejected.
inline constexpr double kHermitianTolerance = 1e-10;

/// Unit vector in the basis of one representation.
class StateVector {
 public:
  StateVector() = default;

  /// Normalizes `amplitudes`; throws NumericalFailure on a zero or non-finite vector.
  static StateVector normalized(Vector amplitudes);

  const Vector& amplitudes() const noexcept { return amplitudes_; }
  Eigen::Index dim() const noexcept { return amplitudes_.size(); }

 private:
  explicit StateVector(Vector a) : amplitudes_(std::move(a)) {}
  Vector amplitudes_;
};

/// Cached eigen-decomposition of a Hermitian generator A, used to apply
/// exp(-i theta A / hbar) in O(n^2) per call.
class UnitaryGenerator {
 public:
  UnitaryGenerator() = default;

  /// Diagonalizes `op` (symmetrized first when within kHermitianTolerance).
  static UnitaryGenerator from_hermitian(const Matrix& op, double hbar);
  /// Generator already diagonal in the working basis.
  static UnitaryGenerator from_diagonal(RealVector eigenvalues, double hbar);
  /// Generator with a known orthonormal eigenbasis (columns of `eigenvectors`).
  static UnitaryGenerator from_eigensystem(RealVector eigenvalues, Matrix eigenvectors, double hbar);

  /// exp(-i theta A / hbar) v
  Vector apply(double theta, const Vector& v) const;
  StateVector apply(double theta, const StateVector& s) const;

  const RealVector& eigenvalues() const noexcept { return eigenvalues_; }
  Eigen::Index dim() const noexcept { return eigenvalues_.size(); }

 private:
  RealVector eigenvalues_;
  Matrix eigenvectors_;  // empty when diagonal_
  bool diagonal_ = false;
  double hbar_ = 1.0;
};

/// Truncated Fock realization of the line: Q, P in units of sqrt(hbar).
struct LineRep {
  Eigen::Index dim = 0;
  double hbar = 1.0;
  Matrix Q, P, D;
  UnitaryGenerator Q_gen, P_gen;
};

enum class GridSpacing { logarithmic, linear };

/// Discretized Q > 0 sector. Amplitudes are c_j = sqrt(w_j) psi(x_j), so the
/// grid inner product is the plain Euclidean one.
struct HalfLineRep {
  GridSpacing spacing = GridSpacing::logarithmic;
  RealVector x;        // strictly increasing, > 0
  RealVector weights;  // quadrature weights for dx
  double hbar = 1.0;
  Matrix D;            // Hermitian dilation generator
  Matrix P_formal;     // formal momentum; Hermitian as a matrix but never exponentiated
  UnitaryGenerator D_gen, Q_gen;

  Eigen::Index size() const noexcept { return x.size(); }
  /// Q is diagonal with the grid abscissae.
  Matrix Q() const { return x.cast<cplx>().asDiagonal(); }
};

/// Spin-s irrep; basis ordered by m descending (index i <-> m = s - i).
struct SpinRep {
  int two_s = 1;
  double hbar = 1.0;
  Matrix S1, S2, S3;
  UnitaryGenerator S2_gen, S3_gen;

  double s() const noexcept { return 0.5 * two_s; }
  Eigen::Index dim() const noexcept { return two_s + 1; }
};

LineRep build_fock_rep(Eigen::Index dim, double hbar = 1.0);

/// Log-spaced grid by default; `spacing` selects a uniform grid instead.
HalfLineRep build_halfline_rep(double x_min, double x_max, Eigen::Index n, double hbar = 1.0,
                               GridSpacing spacing = GridSpacing::logarithmic);

/// `s` must satisfy 2s in {1, 2, ...}.
SpinRep build_spin_rep(double s, double hbar = 1.0);

/// ||[Q,P] - i hbar I|| (Frobenius) on the leading (dim - margin) block.
double commutator_defect(const LineRep& rep, Eigen::Index margin);

/// Basis vector |n> of a truncated Fock space.
StateVector fock_state(const LineRep& rep, Eigen::Index n);
/// |s, m> for m in {s, s-1, ..., -s}.
StateVector spin_basis_state(const SpinRep& rep, double m);

/// Relative Frobenius non-Hermiticity ||A - A^dag|| / ||A||.
double hermiticity_defect(const Matrix& a);

/// <psi|A|psi>
template <typename Derived>
cplx expectation(const StateVector& state, const Eigen::MatrixBase<Derived>& op) {
  if (op.rows() != state.dim() || op.cols() != state.dim()) {
    throw InvalidArgument("expectation: operator is " + std::to_string(op.rows()) + "x" +
                          std::to_string(op.cols()) + ", state has dimension " +
                          std::to_string(state.dim()));
  }
  return state.amplitudes().dot(op * state.amplitudes());
}

/// exp(-i theta A / hbar)|psi>, A Hermitian within kHermitianTolerance.
StateVector apply_unitary(const Matrix& op, double theta, const StateVector& state,
                          double hbar = 1.0);

/// Operator variance <A^2> - <A>^2 (real part).
double variance(const StateVector& state, const Matrix& op);

}  // namespace eq
