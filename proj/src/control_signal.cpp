#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "endpt/errors.hpp"
#include "endpt/signals.hpp"
#include "lexer.hpp"

namespace endpt {

// ---- piecewise-constant ----------------------------------------------------

PiecewiseConstant::PiecewiseConstant(std::vector<Piece> pieces) : pieces_(std::move(pieces)) {
  if (pieces_.empty()) throw ValidationError("piecewise signal needs at least one piece");
  constexpr double tol = 1e-12;
  if (std::abs(pieces_.front().start) > tol || std::abs(pieces_.back().end - 1.0) > tol) {
    throw ValidationError("piecewise signal must cover [0,1]");
  }
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (!(pieces_[i].end > pieces_[i].start)) throw ValidationError("piecewise signal has an empty piece");
    if (i > 0 && std::abs(pieces_[i].start - pieces_[i - 1].end) > tol) {
      throw ValidationError("piecewise signal pieces are not contiguous");
    }
  }
}

double PiecewiseConstant::operator()(double t) const {
  for (const auto& p : pieces_) {
    if (t <= p.end) return p.value;
  }
  return pieces_.back().value;
}

std::vector<double> PiecewiseConstant::breakpoints() const {
  std::vector<double> b;
  for (std::size_t i = 0; i + 1 < pieces_.size(); ++i) b.push_back(pieces_[i].end);
  return b;
}

std::string PiecewiseConstant::to_string() const {
  std::string s = "pw[";
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (i > 0) s += ',';
    s += "(" + format_number(pieces_[i].start) + "," + format_number(pieces_[i].end) + "," +
         format_number(pieces_[i].value) + ")";
  }
  return s + "]";
}

bool operator==(const PiecewiseConstant& a, const PiecewiseConstant& b) {
  return std::equal(a.pieces_.begin(), a.pieces_.end(), b.pieces_.begin(), b.pieces_.end(),
                    [](const auto& x, const auto& y) {
                      return x.start == y.start && x.end == y.end && x.value == y.value;
                    });
}

// ---- text form ---------------------------------------------------------------

namespace {

class SignalParser {
 public:
  explicit SignalParser(std::string_view text) : ts_(text) {}

  SignalChannel run() {
    if (ts_.peek().kind == detail::Token::Kind::ident && ts_.peek().text == "pw") {
      ts_.next();
      SignalChannel ch = piecewise();
      if (!ts_.at_end()) ts_.fail("unexpected trailing input");
      return ch;
    }
    QuasiTrigPoly f = expr();
    if (!ts_.at_end()) ts_.fail("expected operator");
    return f;
  }

 private:
  double signed_number() {
    const bool neg = ts_.accept("-");
    if (!neg) ts_.accept("+");
    const detail::Token tok = ts_.peek();
    if (tok.kind != detail::Token::Kind::number) ts_.fail("expected number");
    ts_.next();
    return neg ? -tok.value : tok.value;
  }

  PiecewiseConstant piecewise() {
    ts_.expect("[");
    std::vector<PiecewiseConstant::Piece> pieces;
    do {
      ts_.expect("(");
      const double a = signed_number();
      ts_.expect(",");
      const double b = signed_number();
      ts_.expect(",");
      const double v = signed_number();
      ts_.expect(")");
      pieces.push_back({a, b, v});
    } while (ts_.accept(","));
    ts_.expect("]");
    return PiecewiseConstant(std::move(pieces));
  }

  QuasiTrigPoly expr() {
    QuasiTrigPoly acc = term();
    for (;;) {
      if (ts_.accept("+")) {
        acc += term();
      } else if (ts_.accept("-")) {
        acc -= term();
      } else {
        return acc;
      }
    }
  }

  QuasiTrigPoly term() {
    QuasiTrigPoly acc = factor();
    while (ts_.accept("*")) acc = acc * factor();
    return acc;
  }

  QuasiTrigPoly factor() {
    if (ts_.accept("-")) return -factor();
    if (ts_.accept("+")) return factor();
    QuasiTrigPoly base = primary();
    if (ts_.accept("^")) return base.pow(ts_.expect_exponent());
    return base;
  }

  QuasiTrigPoly trig_call(Phase ph, std::size_t column) {
    ts_.expect("(");
    const QuasiTrigPoly arg = expr();
    ts_.expect(")");
    // argument must be w*t with w an integer multiple of 2 pi
    double w = 0.0;
    if (!arg.is_zero()) {
      const auto& terms = arg.terms();
      if (terms.size() != 1 || terms[0].power != 1 || terms[0].freq != 0) {
        throw ParseError("trig argument must be 2*pi*m*t for integer m", 1, column);
      }
      w = terms[0].coef;
    }
    const double m = w / (2.0 * std::numbers::pi);
    const double mr = std::round(m);
    if (std::abs(m - mr) > 1e-9 * std::max(1.0, std::abs(m))) {
      throw ParseError("trig frequency is not an integer multiple of 2*pi", 1, column);
    }
    const auto freq = static_cast<unsigned>(std::abs(mr));
    const double sign = (ph == Phase::sin && mr < 0) ? -1.0 : 1.0;
    if (freq == 0) return ph == Phase::cos ? QuasiTrigPoly::constant(1.0) : QuasiTrigPoly();
    return QuasiTrigPoly::trig(ph, freq, sign);
  }

  QuasiTrigPoly primary() {
    const detail::Token tok = ts_.peek();
    using Kind = detail::Token::Kind;
    if (tok.kind == Kind::number) {
      ts_.next();
      return QuasiTrigPoly::constant(tok.value);
    }
    if (tok.kind == Kind::ident) {
      ts_.next();
      if (tok.text == "t") return QuasiTrigPoly::monomial(1);
      if (tok.text == "pi") return QuasiTrigPoly::constant(std::numbers::pi);
      if (tok.text == "sin") return trig_call(Phase::sin, tok.column);
      if (tok.text == "cos") return trig_call(Phase::cos, tok.column);
      throw ParseError("unknown identifier '" + tok.text + "'", 1, tok.column);
    }
    if (ts_.accept("(")) {
      QuasiTrigPoly inner = expr();
      ts_.expect(")");
      return inner;
    }
    ts_.fail("expected number, 't', sin, cos or '('");
  }

  detail::TokenStream ts_;
};

}  // namespace

SignalChannel parse_signal_channel(std::string_view text) { return SignalParser(text).run(); }

std::string to_string(const SignalChannel& ch) {
  return std::visit([](const auto& c) { return c.to_string(); }, ch);
}

// ---- vector signal -------------------------------------------------------------

ControlSignal::ControlSignal(std::vector<SignalChannel> channels) : channels_(std::move(channels)) {}

ControlSignal::ControlSignal(std::vector<QuasiTrigPoly> channels) {
  channels_.reserve(channels.size());
  for (auto& c : channels) channels_.emplace_back(std::move(c));
}

ControlSignal ControlSignal::zero(std::size_t k) { return ControlSignal(std::vector<QuasiTrigPoly>(k)); }

ControlSignal ControlSignal::constant(const Eigen::VectorXd& value) {
  std::vector<QuasiTrigPoly> ch;
  for (Eigen::Index i = 0; i < value.size(); ++i) ch.push_back(QuasiTrigPoly::constant(value[i]));
  return ControlSignal(std::move(ch));
}

ControlSignal ControlSignal::parse(const std::vector<std::string>& channels) {
  std::vector<SignalChannel> ch;
  ch.reserve(channels.size());
  for (const auto& s : channels) ch.push_back(parse_signal_channel(s));
  return ControlSignal(std::move(ch));
}

bool ControlSignal::closed_form() const {
  return std::all_of(channels_.begin(), channels_.end(),
                     [](const SignalChannel& c) { return std::holds_alternative<QuasiTrigPoly>(c); });
}

bool ControlSignal::polynomial() const {
  return std::all_of(channels_.begin(), channels_.end(), [](const SignalChannel& c) {
    const auto* q = std::get_if<QuasiTrigPoly>(&c);
    return q != nullptr && q->is_polynomial();
  });
}

const QuasiTrigPoly& ControlSignal::qtp(std::size_t i) const {
  const auto* q = std::get_if<QuasiTrigPoly>(&channels_.at(i));
  if (q == nullptr) throw ValidationError("control channel is not a closed-form signal");
  return *q;
}

std::vector<double> ControlSignal::breakpoints() const {
  std::set<double> b;
  for (const auto& c : channels_) {
    if (const auto* p = std::get_if<PiecewiseConstant>(&c)) {
      for (double x : p->breakpoints()) b.insert(x);
    }
  }
  return {b.begin(), b.end()};
}

bool ControlSignal::is_zero() const {
  return std::all_of(channels_.begin(), channels_.end(), [](const SignalChannel& c) {
    if (const auto* q = std::get_if<QuasiTrigPoly>(&c)) return q->is_zero();
    const auto& p = std::get<PiecewiseConstant>(c);
    return std::all_of(p.pieces().begin(), p.pieces().end(), [](const auto& x) { return x.value == 0.0; });
  });
}

double ControlSignal::channel_value(std::size_t i, double t) const {
  return std::visit([t](const auto& c) { return c(t); }, channels_[i]);
}

Eigen::VectorXd ControlSignal::operator()(double t) const {
  constexpr double slack = 1e-12;
  if (!(t >= -slack && t <= 1.0 + slack)) throw ValidationError("signal evaluated outside [0,1]");
  Eigen::VectorXd v(static_cast<Eigen::Index>(k()));
  for (std::size_t i = 0; i < k(); ++i) v[static_cast<Eigen::Index>(i)] = channel_value(i, t);
  return v;
}

std::vector<std::string> ControlSignal::to_strings() const {
  std::vector<std::string> out;
  out.reserve(k());
  for (const auto& c : channels_) out.push_back(endpt::to_string(c));
  return out;
}

ControlSignal operator+(const ControlSignal& a, const ControlSignal& b) {
  if (a.k() != b.k()) throw ValidationError("control signals have different channel counts");
  std::vector<QuasiTrigPoly> ch;
  for (std::size_t i = 0; i < a.k(); ++i) ch.push_back(a.qtp(i) + b.qtp(i));
  return ControlSignal(std::move(ch));
}

ControlSignal operator*(double c, const ControlSignal& a) {
  std::vector<SignalChannel> ch;
  for (const auto& x : a.channels_) {
    if (const auto* q = std::get_if<QuasiTrigPoly>(&x)) {
      ch.emplace_back(c * *q);
    } else {
      auto pieces = std::get<PiecewiseConstant>(x).pieces();
      for (auto& p : pieces) p.value *= c;
      ch.emplace_back(PiecewiseConstant(std::move(pieces)));
    }
  }
  return ControlSignal(std::move(ch));
}

}  // namespace endpt
