#ifndef ENDPT_POLYNOMIAL_HPP
#define ENDPT_POLYNOMIAL_HPP

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace endpt {

/**
 * @brief Sparse real polynomial in state variables x1..xN and time t.
 *
 * Exponent vectors have N+1 entries; the last one is the power of t.
 * Terms are kept in a std::map so iteration order (and therefore printing
 * and floating-point summation order) is deterministic.
 */
class Polynomial {
 public:
  using Exponent = std::vector<unsigned>;
  using TermMap = std::map<Exponent, double>;

  explicit Polynomial(std::size_t nvars = 0);

  static Polynomial constant(std::size_t nvars, double c);
  /// var < nvars selects x_{var+1}; var == nvars selects t.
  static Polynomial variable(std::size_t nvars, std::size_t var);
  static Polynomial time(std::size_t nvars) { return variable(nvars, nvars); }
  static Polynomial monomial(std::size_t nvars, Exponent e, double c);

  /// Parses the canonical text form; see grammar in poly_parse.cpp.
  static Polynomial parse(std::string_view text, std::size_t nvars);

  std::size_t nvars() const noexcept { return nvars_; }
  const TermMap& terms() const noexcept { return terms_; }
  bool is_zero() const noexcept { return terms_.empty(); }
  /// Total degree counting state variables and t; -1 for the zero polynomial.
  int degree() const;
  /// Largest power of t appearing.
  unsigned time_degree() const;
  bool depends_on_state() const;

  double coefficient(const Exponent& e) const;

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(double c);

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double c) { return a *= c; }
  friend Polynomial operator*(double c, Polynomial a) { return a *= c; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  Polynomial operator-() const { return *this * -1.0; }

  Polynomial pow(unsigned k) const;

  /// Formal partial derivative; var == nvars differentiates in t.
  Polynomial partial(std::size_t var) const;
  /// Antiderivative in t vanishing at t = 0.
  Polynomial antiderivative_time() const;

  double eval(std::span<const double> x, double t) const;
  long double eval_ld(std::span<const long double> x, long double t) const;

  /**
   * Simultaneous substitution x_i -> state_subs[i], t -> time_sub.
   * All substitutes must share one nvars, which becomes the result's nvars.
   */
  Polynomial compose(std::span<const Polynomial> state_subs, const Polynomial& time_sub) const;

  /// Largest |coefficient|; 0 for the zero polynomial.
  double max_abs_coefficient() const;
  /// Drops terms with |c| <= tol * max(1, max_abs_coefficient()).
  Polynomial pruned(double tol) const;
  bool approx_equal(const Polynomial& o, double rel_tol) const;

  /// Canonical text, e.g. "-3*x1^2*t + 3*x1^2"; parse(to_string()) == *this.
  std::string to_string() const;

  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    return a.nvars_ == b.nvars_ && a.terms_ == b.terms_;
  }

 private:
  void add_term(const Exponent& e, double c);
  void check_same_space(const Polynomial& o) const;

  std::size_t nvars_;
  TermMap terms_;
};

/// Shortest round-trip decimal form of a double.
std::string format_number(double c);

}  // namespace endpt

#endif  // ENDPT_POLYNOMIAL_HPP
