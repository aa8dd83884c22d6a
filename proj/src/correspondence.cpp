#include "eq/correspondence.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <sstream>

namespace eq {

// ---------------------------------------------------------------------------
// letters and words

std::string to_string(Letter l) {
  switch (l) {
    case Letter::P: return "P";
    case Letter::Q: return "Q";
    case Letter::D: return "D";
    case Letter::S1: return "S1";
    case Letter::S2: return "S2";
    case Letter::S3: return "S3";
  }
  return "?";
}

std::string to_string(const Word& w) {
  if (w.empty()) return "1";
  std::string out;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (k) out += '*';
    out += to_string(w[k]);
  }
  return out;
}

namespace {

bool is_spin_letter(Letter l) { return l == Letter::S1 || l == Letter::S2 || l == Letter::S3; }

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

OperatorPolynomial::OperatorPolynomial(std::vector<Term> terms) {
  std::map<Word, double> merged;
  std::vector<Word> order;
  for (auto& t : terms) {
    auto [it, inserted] = merged.try_emplace(t.word, 0.0);
    if (inserted) order.push_back(t.word);
    it->second += t.coefficient;
  }
  bool spin = false, line = false;
  for (const auto& w : order) {
    const double c = merged[w];
    if (c == 0.0) continue;
    for (Letter l : w) (is_spin_letter(l) ? spin : line) = true;
    terms_.push_back({c, w});
  }
  if (spin && line) {
    throw InvalidArgument("operator polynomial mixes spin letters with P/Q/D");
  }
}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  std::vector<Term> parse_sum() {
    std::vector<Term> terms;
    skip_ws();
    if (at_end()) fail("empty expression");
    double sign = 1.0;
    if (peek() == '+' || peek() == '-') {
      sign = (peek() == '-') ? -1.0 : 1.0;
      ++pos_;
    }
    terms.push_back(parse_term(sign));
    for (;;) {
      skip_ws();
      if (at_end()) break;
      const char c = peek();
      if (c != '+' && c != '-') fail("expected '+' or '-'");
      ++pos_;
      terms.push_back(parse_term(c == '-' ? -1.0 : 1.0));
    }
    return terms;
  }

 private:
  Term parse_term(double sign) {
    Term t{sign, {}};
    parse_factor(t);
    for (;;) {
      skip_ws();
      if (at_end() || peek() != '*') break;
      ++pos_;
      parse_factor(t);
    }
    return t;
  }

  void parse_factor(Term& t) {
    skip_ws();
    if (at_end()) fail("expected a factor");
    const char c = peek();
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double v = 0.0;
      const char* begin = s_.data() + pos_;
      auto [ptr, ec] = std::from_chars(begin, s_.data() + s_.size(), v);
      if (ec != std::errc()) fail("malformed number");
      pos_ += static_cast<std::size_t>(ptr - begin);
      t.coefficient *= v;
      return;
    }
    Letter letter;
    if (c == 'P') {
      letter = Letter::P;
      ++pos_;
    } else if (c == 'Q') {
      letter = Letter::Q;
      ++pos_;
    } else if (c == 'D') {
      letter = Letter::D;
      ++pos_;
    } else if (c == 'S') {
      ++pos_;
      if (at_end()) fail("expected S1, S2 or S3");
      const char d = peek();
      if (d == '1') letter = Letter::S1;
      else if (d == '2') letter = Letter::S2;
      else if (d == '3') letter = Letter::S3;
      else fail("expected S1, S2 or S3");
      ++pos_;
    } else {
      fail(std::string("unexpected character '") + c + "'");
    }
    int power = 1;
    skip_ws();
    if (!at_end() && peek() == '^') {
      ++pos_;
      skip_ws();
      if (!at_end() && (peek() == '-' || peek() == '+')) {
        fail("only nonnegative integer powers are allowed");
      }
      const char* begin = s_.data() + pos_;
      auto [ptr, ec] = std::from_chars(begin, s_.data() + s_.size(), power);
      if (ec != std::errc()) fail("expected a nonnegative integer power");
      pos_ += static_cast<std::size_t>(ptr - begin);
      if (!at_end() && (peek() == '.' || peek() == 'e' || peek() == 'E')) {
        fail("only nonnegative integer powers are allowed");
      }
    }
    for (int k = 0; k < power; ++k) t.word.push_back(letter);
  }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
  }
  bool at_end() const { return pos_ >= s_.size(); }
  char peek() const { return s_[pos_]; }
  [[noreturn]] void fail(const std::string& msg) const {
    throw InvalidArgument("operator polynomial: " + msg + " at column " + std::to_string(pos_ + 1) +
                          " in '" + std::string(s_) + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

OperatorPolynomial OperatorPolynomial::parse(std::string_view text) {
  return OperatorPolynomial(Parser(text).parse_sum());
}

VariableSet OperatorPolynomial::variable_set() const {
  bool has_d = false, has_p = false;
  for (const auto& t : terms_) {
    for (Letter l : t.word) {
      if (is_spin_letter(l)) return VariableSet::spin;
      has_d |= (l == Letter::D);
      has_p |= (l == Letter::P);
    }
  }
  return (has_d && !has_p) ? VariableSet::affine : VariableSet::canonical;
}

int OperatorPolynomial::degree() const {
  std::size_t d = 0;
  for (const auto& t : terms_) d = std::max(d, t.word.size());
  return static_cast<int>(d);
}

bool OperatorPolynomial::is_hermitian(double tol) const {
  std::map<Word, double> c;
  for (const auto& t : terms_) c[t.word] += t.coefficient;
  for (const auto& [w, v] : c) {
    Word r(w.rbegin(), w.rend());
    const auto it = c.find(r);
    const double rv = (it == c.end()) ? 0.0 : it->second;
    if (std::abs(v - rv) > tol * std::max(1.0, std::abs(v))) return false;
  }
  return true;
}

std::string OperatorPolynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::string out;
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    const auto& t = terms_[k];
    double c = t.coefficient;
    if (k) {
      out += (c < 0) ? " - " : " + ";
      c = std::abs(c);
    } else if (c < 0) {
      out += "-";
      c = -c;
    }
    out += format_number(c);
    if (!t.word.empty()) out += "*" + eq::to_string(t.word);
  }
  return out;
}

double OperatorPolynomial::classical_value(double p, double q) const {
  double total = 0.0;
  for (const auto& t : terms_) {
    double v = t.coefficient;
    for (Letter l : t.word) {
      switch (l) {
        case Letter::P: v *= p; break;
        case Letter::Q: v *= q; break;
        case Letter::D: v *= p * q; break;
        default: throw InvalidArgument("classical_value: spin letters have no (p,q) monomial");
      }
    }
    total += v;
  }
  return total;
}

OperatorPolynomial OperatorPolynomial::operator+(const OperatorPolynomial& other) const {
  std::vector<Term> all = terms_;
  all.insert(all.end(), other.terms_.begin(), other.terms_.end());
  return OperatorPolynomial(std::move(all));
}

OperatorPolynomial OperatorPolynomial::operator*(double scale) const {
  std::vector<Term> all = terms_;
  for (auto& t : all) t.coefficient *= scale;
  return OperatorPolynomial(std::move(all));
}

// ---------------------------------------------------------------------------
// Hamiltonians

EnhancedHamiltonian::EnhancedHamiltonian(Eval eval, Grad grad, std::string provenance,
                                         double hbar, LabelDomain domain, double spin_radius)
    : eval_(std::move(eval)),
      grad_(std::move(grad)),
      provenance_(std::move(provenance)),
      hbar_(hbar),
      domain_(domain),
      spin_radius_(spin_radius) {
  if (!eval_) throw InvalidArgument("EnhancedHamiltonian: empty evaluator");
}

Gradient EnhancedHamiltonian::gradient(double p, double q) const {
  if (grad_) return grad_(p, q);
  return numeric_gradient(eval_, p, q);
}

bool EnhancedHamiltonian::in_domain(double p, double q) const {
  if (!std::isfinite(p) || !std::isfinite(q)) return false;
  switch (domain_) {
    case LabelDomain::plane: return true;
    case LabelDomain::positive_q: return q > 0.0;
    case LabelDomain::spin_band: return p * p <= spin_radius_ * spin_radius_;
  }
  return false;
}

EnhancedHamiltonian EnhancedHamiltonian::negated() const {
  auto e = eval_;
  EnhancedHamiltonian self = *this;
  EnhancedHamiltonian out(
      [e](double p, double q) { return -e(p, q); },
      [self](double p, double q) {
        const Gradient g = self.gradient(p, q);
        return Gradient{-g.dp, -g.dq};
      },
      "-(" + provenance_ + ")", hbar_, domain_, spin_radius_);
  out.notes_ = notes_;
  return out;
}

EnhancedHamiltonian EnhancedHamiltonian::shifted(double c) const {
  auto e = eval_;
  EnhancedHamiltonian self = *this;
  EnhancedHamiltonian out([e, c](double p, double q) { return e(p, q) + c; },
                          [self](double p, double q) { return self.gradient(p, q); },
                          provenance_ + " + " + format_number(c), hbar_, domain_, spin_radius_);
  out.notes_ = notes_;
  return out;
}

Gradient numeric_gradient(const EnhancedHamiltonian::Eval& f, double p, double q, double h) {
  const auto central = [&](double step) {
    return Gradient{(f(p + step, q) - f(p - step, q)) / (2 * step),
                    (f(p, q + step) - f(p, q - step)) / (2 * step)};
  };
  const Gradient a = central(h), b = central(h / 2);
  return {(4 * b.dp - a.dp) / 3, (4 * b.dq - a.dq) / 3};
}

void LabelPolynomial::add(int i, int j, double c) { c_[{i, j}] += c; }

double LabelPolynomial::evaluate(double p, double q) const {
  double s = 0.0;
  for (const auto& [ij, c] : c_) s += c * std::pow(p, ij.first) * std::pow(q, ij.second);
  return s;
}

Gradient LabelPolynomial::gradient(double p, double q) const {
  Gradient g;
  for (const auto& [ij, c] : c_) {
    const auto [i, j] = ij;
    if (i != 0) g.dp += c * i * std::pow(p, i - 1) * std::pow(q, j);
    if (j != 0) g.dq += c * j * std::pow(p, i) * std::pow(q, j - 1);
  }
  return g;
}

// ---------------------------------------------------------------------------
// operator application

Vector apply_letter(const CoherentFamily& family, Letter letter, const Vector& v) {
  if (const LineRep* r = family.line()) {
    switch (letter) {
      case Letter::P: return r->P * v;
      case Letter::Q: return r->Q * v;
      case Letter::D: return r->D * v;
      default: break;
    }
  } else if (const HalfLineRep* r = family.halfline()) {
    switch (letter) {
      case Letter::Q: return r->x.cast<cplx>().cwiseProduct(v);
      case Letter::D: return r->D * v;
      case Letter::P: return r->P_formal * v;
      default: break;
    }
  } else if (const SpinRep* r = family.spin()) {
    switch (letter) {
      case Letter::S1: return r->S1 * v;
      case Letter::S2: return r->S2 * v;
      case Letter::S3: return r->S3 * v;
      default: break;
    }
  }
  throw InvalidArgument("operator letter " + to_string(letter) + " is not available in the " +
                        to_string(family.kind()) + " family's representation");
}

namespace {

Vector apply_word(const CoherentFamily& family, const Word& w, Vector v) {
  for (auto it = w.rbegin(); it != w.rend(); ++it) v = apply_letter(family, *it, v);
  return v;
}

void check_compatible(const OperatorPolynomial& poly, const CoherentFamily& family) {
  const Vector probe = Vector::Zero(family.fiducial().dim());
  for (const auto& t : poly.terms()) {
    for (Letter l : t.word) apply_letter(family, l, probe);
  }
}

}  // namespace

Vector apply_polynomial(const OperatorPolynomial& poly, const CoherentFamily& family,
                        const Vector& v) {
  Vector out = Vector::Zero(v.size());
  for (const auto& t : poly.terms()) out += t.coefficient * apply_word(family, t.word, v);
  return out;
}

cplx direct_expectation(const OperatorPolynomial& poly, const CoherentFamily& family, double p,
                        double q) {
  const StateVector s = family.state(p, q);
  return s.amplitudes().dot(apply_polynomial(poly, family, s.amplitudes()));
}

// ---------------------------------------------------------------------------
// shift identity

namespace {

struct Substitution {
  int ip = 0, iq = 0;
  std::optional<Letter> letter;  // nullopt = identity
};

std::vector<Substitution> substitutions(FamilyKind kind, Letter l) {
  if (kind == FamilyKind::canonical) {
    switch (l) {
      case Letter::P: return {{0, 0, Letter::P}, {1, 0, std::nullopt}};
      case Letter::Q: return {{0, 0, Letter::Q}, {0, 1, std::nullopt}};
      // (PQ+QP)/2 shifted: D + qP + pQ + pq
      case Letter::D:
        return {{0, 0, Letter::D}, {0, 1, Letter::P}, {1, 0, Letter::Q}, {1, 1, std::nullopt}};
      default: break;
    }
  } else if (kind == FamilyKind::affine) {
    switch (l) {
      case Letter::D: return {{0, 0, Letter::D}, {1, 1, Letter::Q}};
      case Letter::Q: return {{0, 1, Letter::Q}};
      case Letter::P: return {{0, -1, Letter::P}, {1, 0, std::nullopt}};
      default: break;
    }
  }
  throw InvalidArgument("shift identity: letter " + to_string(l) + " unsupported for the " +
                        to_string(kind) + " family");
}

// Fiducial behaves as x^{beta/hbar - 1/2} near 0; Q raises the power, P lowers it.
bool fiducial_finite(const Word& w, double leading_power) {
  const std::size_t mid = w.size() / 2;
  const auto walk = [&](auto begin, auto end) {
    double e = leading_power;
    for (auto it = begin; it != end; ++it) {
      if (*it == Letter::Q) e += 1.0;
      if (*it == Letter::P) e -= 1.0;
      if (!(e > -0.5)) return false;
    }
    return true;
  };
  // ket side applies w[mid..] right to left; bra side applies w[..mid) left to right
  return walk(w.rbegin(), w.rbegin() + static_cast<long>(w.size() - mid)) &&
         walk(w.begin(), w.begin() + static_cast<long>(mid));
}

}  // namespace

ShiftExpansion shift_expansion(const OperatorPolynomial& poly, const CoherentFamily& family) {
  const FamilyKind kind = family.kind();
  if (kind != FamilyKind::canonical && kind != FamilyKind::affine) {
    throw InvalidArgument("shift identity applies to canonical and affine families only");
  }
  check_compatible(poly, family);
  const Vector& f = family.fiducial().amplitudes();
  const double leading =
      kind == FamilyKind::affine ? family.params().beta / family.hbar() - 0.5 : 0.0;

  ShiftExpansion out;
  std::map<Word, cplx> moments;
  const auto moment = [&](const Word& w) -> cplx {
    auto it = moments.find(w);
    if (it != moments.end()) return it->second;
    if (kind == FamilyKind::affine &&
        std::find(w.begin(), w.end(), Letter::P) != w.end() && !fiducial_finite(w, leading)) {
      out.formal.push_back(to_string(w));
    }
    const cplx m = f.dot(apply_word(family, w, f));
    moments.emplace(w, m);
    return m;
  };

  std::map<std::pair<int, int>, cplx> acc;
  for (const auto& t : poly.terms()) {
    std::vector<std::vector<Substitution>> choices;
    for (Letter l : t.word) choices.push_back(substitutions(kind, l));
    std::vector<std::size_t> idx(choices.size(), 0);
    for (;;) {
      int ip = 0, iq = 0;
      Word reduced;
      for (std::size_t k = 0; k < choices.size(); ++k) {
        const Substitution& s = choices[k][idx[k]];
        ip += s.ip;
        iq += s.iq;
        if (s.letter) reduced.push_back(*s.letter);
      }
      acc[{ip, iq}] += t.coefficient * moment(reduced);
      std::size_t k = 0;
      for (; k < idx.size(); ++k) {
        if (++idx[k] < choices[k].size()) break;
        idx[k] = 0;
      }
      if (k == idx.size()) break;
    }
  }
  for (const auto& [ij, c] : acc) {
    out.max_imaginary = std::max(out.max_imaginary, std::abs(c.imag()));
    if (c.real() != 0.0) out.polynomial.add(ij.first, ij.second, c.real());
  }
  std::sort(out.formal.begin(), out.formal.end());
  out.formal.erase(std::unique(out.formal.begin(), out.formal.end()), out.formal.end());
  return out;
}

// ---------------------------------------------------------------------------
// enhance

EnhancedHamiltonian enhance(const OperatorPolynomial& poly, const CoherentFamily& family,
                            const EnhanceOptions& options) {
  if (poly.degree() > options.max_degree) {
    throw InvalidArgument("enhance: polynomial degree " + std::to_string(poly.degree()) +
                          " exceeds the cap " + std::to_string(options.max_degree));
  }
  if (!poly.is_hermitian()) {
    throw InvalidArgument("enhance: polynomial '" + poly.to_string() + "' is not Hermitian");
  }
  check_compatible(poly, family);
  const std::string provenance =
      "expectation(" + poly.to_string() + ", " + to_string(family.kind()) + " family)";

  switch (family.kind()) {
    case FamilyKind::canonical:
    case FamilyKind::affine: {
      ShiftExpansion ex = shift_expansion(poly, family);
      if (ex.max_imaginary > 1e-8) {
        throw NumericalFailure("enhance: fiducial moments left an imaginary part " +
                               format_number(ex.max_imaginary));
      }
      auto lp = std::make_shared<const LabelPolynomial>(std::move(ex.polynomial));
      const bool affine = family.kind() == FamilyKind::affine;
      EnhancedHamiltonian h(
          [lp](double p, double q) { return lp->evaluate(p, q); },
          [lp](double p, double q) { return lp->gradient(p, q); }, provenance, family.hbar(),
          affine ? LabelDomain::positive_q : LabelDomain::plane);
      for (const auto& w : ex.formal) h.add_note("formal half-line word (not fiducial-finite): " + w);
      return h;
    }
    case FamilyKind::spin: {
      const SpinRep& rep = *family.spin();
      const double r = std::sqrt(rep.s() * rep.hbar);
      auto fam = std::make_shared<const CoherentFamily>(family);
      auto pol = std::make_shared<const OperatorPolynomial>(poly);
      auto eval = [fam, pol](double p, double q) {
        return direct_expectation(*pol, *fam, p, q).real();
      };
      auto grad = [fam, pol, r](double p, double q) {
        const SpinRep& sr = *fam->spin();
        const StateVector s = fam->state(p, q);
        const Vector& psi = s.amplitudes();
        const Vector a_psi = apply_polynomial(*pol, *fam, psi);
        const cplx mi(0.0, -1.0);
        // d/dq: phi = q / r
        const Vector dq = (mi / (sr.hbar * r)) * (sr.S3 * psi);
        // d/dp: theta = acos(p / r)
        const double theta = std::acos(std::clamp(p / r, -1.0, 1.0));
        Vector inner = sr.S2_gen.apply(theta, [&] {
          Vector top = Vector::Zero(sr.dim());
          top(0) = 1.0;
          return top;
        }());
        inner = (mi / sr.hbar) * (sr.S2 * inner);
        const Vector dtheta = sr.S3_gen.apply(q / r, inner);
        const double dtheta_dp = -1.0 / std::sqrt(r * r - p * p);
        return Gradient{2.0 * a_psi.dot(dtheta).real() * dtheta_dp, 2.0 * a_psi.dot(dq).real()};
      };
      return EnhancedHamiltonian(eval, grad, provenance, family.hbar(), LabelDomain::spin_band, r);
    }
    case FamilyKind::extended: {
      auto fam = std::make_shared<const CoherentFamily>(family);
      auto pol = std::make_shared<const OperatorPolynomial>(poly);
      return EnhancedHamiltonian(
          [fam, pol](double p, double q) { return direct_expectation(*pol, *fam, p, q).real(); },
          {}, provenance, family.hbar(), LabelDomain::plane);
    }
  }
  throw InvalidArgument("enhance: unknown family kind");
}

ShiftCheckReport shift_identity_check(const OperatorPolynomial& poly, const CoherentFamily& family,
                                      const std::vector<std::pair<double, double>>& samples) {
  const ShiftExpansion ex = shift_expansion(poly, family);
  ShiftCheckReport report;
  report.samples = samples.size();
  for (const auto& [p, q] : samples) {
    const cplx direct = direct_expectation(poly, family, p, q);
    const double shifted = ex.polynomial.evaluate(p, q);
    const double dev = std::abs(direct.real() - shifted);
    report.deviations.push_back(dev);
    report.max_deviation = std::max(report.max_deviation, dev);
    report.max_imaginary = std::max(report.max_imaginary, std::abs(direct.imag()));
  }
  return report;
}

// ---------------------------------------------------------------------------
// classical limit

LimitResult classical_limit(const HamiltonianBuilder& builder, double p, double q,
                            const std::vector<double>& hbar_sequence,
                            const LimitOptions& options) {
  const std::size_t n = hbar_sequence.size();
  if (n < 3) throw InvalidArgument("classical_limit: need at least 3 hbar values");
  for (std::size_t k = 0; k < n; ++k) {
    if (!(hbar_sequence[k] > 0.0)) throw InvalidArgument("classical_limit: hbar values must be > 0");
    if (k && !(hbar_sequence[k] < hbar_sequence[k - 1])) {
      throw InvalidArgument("classical_limit: hbar sequence must be strictly decreasing");
    }
  }
  LimitResult res;
  res.hbars = hbar_sequence;
  for (double h : hbar_sequence) res.values.push_back(builder(h)(p, q));

  const int degree = std::max(1, std::min<int>(options.max_fit_degree, static_cast<int>(n) - 2));
  Eigen::MatrixXd vander(n, degree + 1);
  Eigen::VectorXd rhs(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (int d = 0; d <= degree; ++d) vander(k, d) = std::pow(hbar_sequence[k], d);
    rhs(k) = res.values[k];
  }
  const Eigen::VectorXd coef = vander.colPivHouseholderQr().solve(rhs);
  const Eigen::VectorXd fit = vander * coef;
  res.residual = (fit - rhs).cwiseAbs().maxCoeff();
  res.coefficients.assign(coef.data(), coef.data() + coef.size());
  res.limit = coef(0);

  const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
  if (!std::isfinite(res.residual) || res.residual > options.residual_tol * scale) {
    std::ostringstream os;
    os << "classical_limit: polynomial fit did not converge (max residual " << res.residual
       << "); residuals:";
    for (std::size_t k = 0; k < n; ++k) os << ' ' << (fit(k) - rhs(k));
    throw NumericalFailure(os.str());
  }
  const double h_max = hbar_sequence.front();
  for (int d = 1; d <= degree; ++d) {
    if (std::abs(coef(d)) * std::pow(h_max, d) > options.power_tol * scale) {
      res.leading_power = d;
      break;
    }
  }
  return res;
}

HamiltonianBuilder canonical_builder(const OperatorPolynomial& poly, double p_max, double q_max) {
  return [poly, p_max, q_max](double hbar) {
    const Eigen::Index dim =
        std::max<Eigen::Index>(required_fock_dim(p_max, q_max, hbar), poly.degree() + 8);
    auto rep = std::make_shared<const LineRep>(build_fock_rep(dim, hbar));
    return enhance(poly, canonical_family(rep));
  };
}

}  // namespace eq
