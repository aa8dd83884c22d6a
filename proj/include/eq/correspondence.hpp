#pragma once

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eq/coherent.hpp"

namespace eq {

enum class Letter { P, Q, D, S1, S2, S3 };
using Word = std::vector<Letter>;

std::string to_string(Letter l);
std::string to_string(const Word& w);

struct Term {
  double coefficient = 0.0;
  Word word;  // empty word = identity
};

enum class VariableSet { canonical, affine, spin };

/// Real linear combination of operator words over {P, Q, D, S1, S2, S3}.
/// Like words are merged on construction.
class OperatorPolynomial {
 public:
  OperatorPolynomial() = default;
  explicit OperatorPolynomial(std::vector<Term> terms);

  /// Grammar: sum of products, e.g. `0.5*P^2 + 0.5*Q^2 - 2*P*Q*P + 1`.
  /// Only nonnegative integer powers; no parentheses.
  static OperatorPolynomial parse(std::string_view text);

  const std::vector<Term>& terms() const noexcept { return terms_; }
  VariableSet variable_set() const;
  int degree() const;
  /// Each word's coefficient equals that of its reversal.
  bool is_hermitian(double tol = 1e-12) const;
  std::string to_string() const;

  /// c-number evaluation with P -> p, Q -> q, D -> p q.
  double classical_value(double p, double q) const;

  OperatorPolynomial operator+(const OperatorPolynomial& other) const;
  OperatorPolynomial operator*(double scale) const;

 private:
  std::vector<Term> terms_;
};

struct Gradient {
  double dp = 0.0;
  double dq = 0.0;
};

enum class LabelDomain { plane, positive_q, spin_band };

/// Real-valued H(p, q) with gradient access. Function objects are shared and
/// immutable, so copies are cheap and thread-safe.
class EnhancedHamiltonian {
 public:
  using Eval = std::function<double(double, double)>;
  using Grad = std::function<Gradient(double, double)>;

  EnhancedHamiltonian() = default;
  /// When `grad` is empty the gradient falls back to Richardson-extrapolated
  /// central differences of `eval`.
  EnhancedHamiltonian(Eval eval, Grad grad, std::string provenance, double hbar,
                      LabelDomain domain = LabelDomain::plane, double spin_radius = 0.0);

  double operator()(double p, double q) const { return eval_(p, q); }
  double evaluate(double p, double q) const { return eval_(p, q); }
  Gradient gradient(double p, double q) const;

  const std::string& provenance() const noexcept { return provenance_; }
  double hbar() const noexcept { return hbar_; }
  LabelDomain domain() const noexcept { return domain_; }
  double spin_radius() const noexcept { return spin_radius_; }
  bool in_domain(double p, double q) const;

  /// Diagnostics attached at construction (e.g. formal half-line P words).
  const std::vector<std::string>& notes() const noexcept { return notes_; }
  void add_note(std::string note) { notes_.push_back(std::move(note)); }

  /// -H, same domain (time-reversed flow).
  EnhancedHamiltonian negated() const;
  /// H + c
  EnhancedHamiltonian shifted(double c) const;

 private:
  Eval eval_;
  Grad grad_;
  std::string provenance_;
  double hbar_ = 1.0;
  LabelDomain domain_ = LabelDomain::plane;
  double spin_radius_ = 0.0;
  std::vector<std::string> notes_;
};

/// Central-difference gradient with one Richardson step.
Gradient numeric_gradient(const EnhancedHamiltonian::Eval& f, double p, double q,
                          double h = 1e-4);

/// Bivariate Laurent polynomial sum c_ij p^i q^j (j may be negative).
class LabelPolynomial {
 public:
  void add(int i, int j, double c);
  double evaluate(double p, double q) const;
  Gradient gradient(double p, double q) const;
  const std::map<std::pair<int, int>, double>& coefficients() const noexcept { return c_; }

 private:
  std::map<std::pair<int, int>, double> c_;
};

/// Applies one operator letter in the family's representation.
Vector apply_letter(const CoherentFamily& family, Letter letter, const Vector& v);
/// poly |v>
Vector apply_polynomial(const OperatorPolynomial& poly, const CoherentFamily& family,
                        const Vector& v);
/// <p,q|poly|p,q> by direct matrix products (complex, for reality checks).
cplx direct_expectation(const OperatorPolynomial& poly, const CoherentFamily& family, double p,
                        double q);

/// Fiducial moments expanded through the shift identity: canonical
/// <0|W(P+p, Q+q)|0>, affine <beta|W(D + pqQ, qQ, P/q + p)|beta>.
struct ShiftExpansion {
  LabelPolynomial polynomial;
  double max_imaginary = 0.0;       // largest |Im| of a combined coefficient
  std::vector<std::string> formal;  // half-line words that are not fiducial-finite
};
ShiftExpansion shift_expansion(const OperatorPolynomial& poly, const CoherentFamily& family);

struct EnhanceOptions {
  int max_degree = 6;
};

/// H(p,q) = <p,q|poly|p,q>. Canonical and affine families evaluate through
/// cached fiducial moments; spin and extended families by direct products.
EnhancedHamiltonian enhance(const OperatorPolynomial& poly, const CoherentFamily& family,
                            const EnhanceOptions& options = {});

struct ShiftCheckReport {
  std::size_t samples = 0;
  double max_deviation = 0.0;
  double max_imaginary = 0.0;
  std::vector<double> deviations;
};

/// Compares direct matrix expectation with the shifted-fiducial expansion.
ShiftCheckReport shift_identity_check(const OperatorPolynomial& poly, const CoherentFamily& family,
                                      const std::vector<std::pair<double, double>>& samples);

struct LimitOptions {
  int max_fit_degree = 3;
  double residual_tol = 1e-6;  // relative to max(1, max |H|)
  double power_tol = 1e-8;     // coefficient threshold for the leading power
};

struct LimitResult {
  double limit = 0.0;
  int leading_power = 0;  // 0 when H does not depend on hbar
  std::vector<double> coefficients;  // fit in powers of hbar
  std::vector<double> hbars, values;
  double residual = 0.0;  // max |fit - value|
};

using HamiltonianBuilder = std::function<EnhancedHamiltonian(double hbar)>;

/// Polynomial extrapolation of H(p,q; hbar) to hbar = 0.
LimitResult classical_limit(const HamiltonianBuilder& builder, double p, double q,
                            const std::vector<double>& hbar_sequence,
                            const LimitOptions& options = {});

/// Builder for canonical families whose Fock dimension grows as labels/sqrt(hbar).
HamiltonianBuilder canonical_builder(const OperatorPolynomial& poly, double p_max, double q_max);

}  // namespace eq
