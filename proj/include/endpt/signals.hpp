#ifndef ENDPT_SIGNALS_HPP
#define ENDPT_SIGNALS_HPP

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "endpt/polynomial.hpp"

namespace endpt {

enum class Phase { cos, sin };

/// c * t^power * trig(2 pi freq t); (freq 0, cos) is the monomial t^power.
struct TrigTerm {
  double coef;
  unsigned power;
  unsigned freq;
  Phase phase;
};

/**
 * @brief Finite sum of t^k cos(2 pi m t) and t^k sin(2 pi m t) terms.
 *
 * Closed under products and antiderivatives, so iterated integrals of
 * products of such signals have closed forms.
 */
class QuasiTrigPoly {
 public:
  QuasiTrigPoly() = default;
  explicit QuasiTrigPoly(std::vector<TrigTerm> terms);

  static QuasiTrigPoly constant(double c);
  static QuasiTrigPoly monomial(unsigned power, double c = 1.0);
  static QuasiTrigPoly trig(Phase phase, unsigned freq, double c = 1.0);
  /// Converts a polynomial in t alone (no state dependence).
  static QuasiTrigPoly from_time_polynomial(const Polynomial& p);

  const std::vector<TrigTerm>& terms() const noexcept { return terms_; }
  bool is_zero() const noexcept { return terms_.empty(); }
  /// True when every term has frequency 0.
  bool is_polynomial() const;
  /// Polynomial in t embedded in nvars state variables; requires is_polynomial().
  Polynomial to_polynomial(std::size_t nvars) const;
  unsigned max_power() const;
  unsigned max_freq() const;

  double operator()(double t) const;

  QuasiTrigPoly& operator+=(const QuasiTrigPoly& o);
  QuasiTrigPoly& operator-=(const QuasiTrigPoly& o);
  QuasiTrigPoly& operator*=(double c);
  friend QuasiTrigPoly operator+(QuasiTrigPoly a, const QuasiTrigPoly& b) { return a += b; }
  friend QuasiTrigPoly operator-(QuasiTrigPoly a, const QuasiTrigPoly& b) { return a -= b; }
  friend QuasiTrigPoly operator*(QuasiTrigPoly a, double c) { return a *= c; }
  friend QuasiTrigPoly operator*(double c, QuasiTrigPoly a) { return a *= c; }
  friend QuasiTrigPoly operator*(const QuasiTrigPoly& a, const QuasiTrigPoly& b);
  QuasiTrigPoly operator-() const { return *this * -1.0; }

  QuasiTrigPoly pow(unsigned k) const;
  QuasiTrigPoly derivative() const;
  /// F with F(0) = 0 and F' = f.
  QuasiTrigPoly antiderivative() const;
  double integral(double a, double b) const;

  /// Text form accepted by parse_signal_channel.
  std::string to_string() const;

  friend bool operator==(const QuasiTrigPoly& a, const QuasiTrigPoly& b);

 private:
  void normalize();
  std::vector<TrigTerm> terms_;
};

QuasiTrigPoly qtp_mul(const QuasiTrigPoly& a, const QuasiTrigPoly& b);
QuasiTrigPoly qtp_antiderivative(const QuasiTrigPoly& f);

/// Piecewise-constant signal; piece i covers (start_i, end_i], the first also its start.
class PiecewiseConstant {
 public:
  struct Piece {
    double start;
    double end;
    double value;
  };

  explicit PiecewiseConstant(std::vector<Piece> pieces);

  const std::vector<Piece>& pieces() const noexcept { return pieces_; }
  double operator()(double t) const;
  /// Interior breakpoints, sorted.
  std::vector<double> breakpoints() const;
  std::string to_string() const;

  friend bool operator==(const PiecewiseConstant& a, const PiecewiseConstant& b);

 private:
  std::vector<Piece> pieces_;
};

using SignalChannel = std::variant<QuasiTrigPoly, PiecewiseConstant>;

/// Parses "2*pi*sin(2*pi*t)", "1", "pw[(0,0.5,1),(0.5,1,-1)]".
SignalChannel parse_signal_channel(std::string_view text);
std::string to_string(const SignalChannel& ch);

/**
 * @brief Vector-valued control on [0,1], one channel per control field.
 */
class ControlSignal {
 public:
  ControlSignal() = default;
  explicit ControlSignal(std::vector<SignalChannel> channels);
  explicit ControlSignal(std::vector<QuasiTrigPoly> channels);

  static ControlSignal zero(std::size_t k);
  static ControlSignal constant(const Eigen::VectorXd& value);
  static ControlSignal parse(const std::vector<std::string>& channels);

  std::size_t k() const noexcept { return channels_.size(); }
  const std::vector<SignalChannel>& channels() const noexcept { return channels_; }
  /// True when every channel is a QuasiTrigPoly.
  bool closed_form() const;
  /// True when every channel is a polynomial in t.
  bool polynomial() const;
  /// Channel i as QuasiTrigPoly; requires closed_form().
  const QuasiTrigPoly& qtp(std::size_t i) const;
  std::vector<double> breakpoints() const;
  bool is_zero() const;

  /// Evaluation on [0,1]; throws ValidationError outside it.
  Eigen::VectorXd operator()(double t) const;
  double channel_value(std::size_t i, double t) const;

  std::vector<std::string> to_strings() const;

  /// Linear combination; both operands must be closed_form().
  friend ControlSignal operator+(const ControlSignal& a, const ControlSignal& b);
  friend ControlSignal operator*(double c, const ControlSignal& a);
  friend bool operator==(const ControlSignal& a, const ControlSignal& b) { return a.channels_ == b.channels_; }

 private:
  std::vector<SignalChannel> channels_;
};

inline Eigen::VectorXd signal_eval(const ControlSignal& s, double t) { return s(t); }

}  // namespace endpt

#endif  // ENDPT_SIGNALS_HPP
