#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "endpt/errors.hpp"
#include "endpt/signals.hpp"

namespace endpt {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

auto key(const TrigTerm& t) { return std::tuple(t.power, t.freq, t.phase == Phase::sin); }

// Indefinite antiderivative of t^k trig(2 pi m t), m > 0, by parts.
void antiderivative_term(double c, unsigned k, unsigned m, Phase ph, std::vector<TrigTerm>& out) {
  const double w = two_pi * static_cast<double>(m);
  if (ph == Phase::cos) {
    out.push_back({c / w, k, m, Phase::sin});
    if (k > 0) antiderivative_term(-c * static_cast<double>(k) / w, k - 1, m, Phase::sin, out);
  } else {
    out.push_back({-c / w, k, m, Phase::cos});
    if (k > 0) antiderivative_term(c * static_cast<double>(k) / w, k - 1, m, Phase::cos, out);
  }
}

}  // namespace

QuasiTrigPoly::QuasiTrigPoly(std::vector<TrigTerm> terms) : terms_(std::move(terms)) { normalize(); }

void QuasiTrigPoly::normalize() {
  std::sort(terms_.begin(), terms_.end(), [](const TrigTerm& a, const TrigTerm& b) { return key(a) < key(b); });
  std::vector<TrigTerm> merged;
  merged.reserve(terms_.size());
  for (const auto& t : terms_) {
    if (t.freq == 0 && t.phase == Phase::sin) continue;
    if (!merged.empty() && key(merged.back()) == key(t)) {
      merged.back().coef += t.coef;
    } else {
      merged.push_back(t);
    }
  }
  std::erase_if(merged, [](const TrigTerm& t) { return t.coef == 0.0; });
  terms_ = std::move(merged);
}

QuasiTrigPoly QuasiTrigPoly::constant(double c) { return QuasiTrigPoly({{c, 0, 0, Phase::cos}}); }
QuasiTrigPoly QuasiTrigPoly::monomial(unsigned power, double c) { return QuasiTrigPoly({{c, power, 0, Phase::cos}}); }
QuasiTrigPoly QuasiTrigPoly::trig(Phase phase, unsigned freq, double c) { return QuasiTrigPoly({{c, 0, freq, phase}}); }

QuasiTrigPoly QuasiTrigPoly::from_time_polynomial(const Polynomial& p) {
  if (p.depends_on_state()) throw ValidationError("from_time_polynomial: polynomial depends on state");
  std::vector<TrigTerm> terms;
  for (const auto& [e, c] : p.terms()) terms.push_back({c, e.back(), 0, Phase::cos});
  return QuasiTrigPoly(std::move(terms));
}

bool QuasiTrigPoly::is_polynomial() const {
  return std::all_of(terms_.begin(), terms_.end(), [](const TrigTerm& t) { return t.freq == 0; });
}

Polynomial QuasiTrigPoly::to_polynomial(std::size_t nvars) const {
  if (!is_polynomial()) throw ValidationError("control channel is not polynomial in t");
  Polynomial p(nvars);
  for (const auto& t : terms_) {
    Polynomial::Exponent e(nvars + 1, 0U);
    e.back() = t.power;
    p += Polynomial::monomial(nvars, e, t.coef);
  }
  return p;
}

unsigned QuasiTrigPoly::max_power() const {
  unsigned m = 0;
  for (const auto& t : terms_) m = std::max(m, t.power);
  return m;
}

unsigned QuasiTrigPoly::max_freq() const {
  unsigned m = 0;
  for (const auto& t : terms_) m = std::max(m, t.freq);
  return m;
}

double QuasiTrigPoly::operator()(double t) const {
  double s = 0.0;
  for (const auto& term : terms_) {
    double v = term.coef * std::pow(t, static_cast<double>(term.power));
    if (term.freq != 0) {
      const double a = two_pi * static_cast<double>(term.freq) * t;
      v *= term.phase == Phase::cos ? std::cos(a) : std::sin(a);
    }
    s += v;
  }
  return s;
}

QuasiTrigPoly& QuasiTrigPoly::operator+=(const QuasiTrigPoly& o) {
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  normalize();
  return *this;
}

QuasiTrigPoly& QuasiTrigPoly::operator-=(const QuasiTrigPoly& o) { return *this += -o; }

QuasiTrigPoly& QuasiTrigPoly::operator*=(double c) {
  for (auto& t : terms_) t.coef *= c;
  normalize();
  return *this;
}

QuasiTrigPoly operator*(const QuasiTrigPoly& a, const QuasiTrigPoly& b) {
  std::vector<TrigTerm> out;
  out.reserve(2 * a.terms_.size() * b.terms_.size());
  for (const auto& x : a.terms_) {
    for (const auto& y : b.terms_) {
      const double h = 0.5 * x.coef * y.coef;
      const unsigned k = x.power + y.power;
      const unsigned sum = x.freq + y.freq;
      const unsigned diff = x.freq > y.freq ? x.freq - y.freq : y.freq - x.freq;
      // sign of sin(2 pi (m_x - m_y) t) after folding to a non-negative frequency
      const double sd = x.freq >= y.freq ? 1.0 : -1.0;
      if (x.phase == Phase::cos && y.phase == Phase::cos) {
        out.push_back({h, k, sum, Phase::cos});
        out.push_back({h, k, diff, Phase::cos});
      } else if (x.phase == Phase::sin && y.phase == Phase::sin) {
        out.push_back({h, k, diff, Phase::cos});
        out.push_back({-h, k, sum, Phase::cos});
      } else if (x.phase == Phase::sin) {
        out.push_back({h, k, sum, Phase::sin});
        out.push_back({h * sd, k, diff, Phase::sin});
      } else {
        out.push_back({h, k, sum, Phase::sin});
        out.push_back({-h * sd, k, diff, Phase::sin});
      }
    }
  }
  return QuasiTrigPoly(std::move(out));
}

QuasiTrigPoly QuasiTrigPoly::pow(unsigned k) const {
  QuasiTrigPoly r = constant(1.0);
  for (unsigned i = 0; i < k; ++i) r = r * *this;
  return r;
}

QuasiTrigPoly QuasiTrigPoly::derivative() const {
  std::vector<TrigTerm> out;
  for (const auto& t : terms_) {
    if (t.power > 0) out.push_back({t.coef * static_cast<double>(t.power), t.power - 1, t.freq, t.phase});
    if (t.freq > 0) {
      const double w = two_pi * static_cast<double>(t.freq);
      if (t.phase == Phase::cos) {
        out.push_back({-t.coef * w, t.power, t.freq, Phase::sin});
      } else {
        out.push_back({t.coef * w, t.power, t.freq, Phase::cos});
      }
    }
  }
  return QuasiTrigPoly(std::move(out));
}

QuasiTrigPoly QuasiTrigPoly::antiderivative() const {
  std::vector<TrigTerm> out;
  for (const auto& t : terms_) {
    if (t.freq == 0) {
      out.push_back({t.coef / static_cast<double>(t.power + 1), t.power + 1, 0, Phase::cos});
    } else {
      antiderivative_term(t.coef, t.power, t.freq, t.phase, out);
    }
  }
  QuasiTrigPoly F(std::move(out));
  // Only (power 0, cos) terms are nonzero at t = 0.
  double at0 = 0.0;
  for (const auto& t : F.terms_) {
    if (t.power == 0 && t.phase == Phase::cos) at0 += t.coef;
  }
  if (at0 != 0.0) F -= constant(at0);
  return F;
}

double QuasiTrigPoly::integral(double a, double b) const {
  const QuasiTrigPoly F = antiderivative();
  return F(b) - F(a);
}

std::string QuasiTrigPoly::to_string() const {
  if (terms_.empty()) return "0";
  std::string out;
  bool first = true;
  for (const auto& t : terms_) {
    std::string factors;
    if (t.power > 0) factors = t.power == 1 ? "t" : "t^" + std::to_string(t.power);
    if (t.freq > 0) {
      if (!factors.empty()) factors += '*';
      factors += t.phase == Phase::cos ? "cos(" : "sin(";
      factors += std::to_string(2 * t.freq) + "*pi*t)";
    }
    const double mag = std::abs(t.coef);
    if (first) {
      if (t.coef < 0) out += '-';
    } else {
      out += t.coef < 0 ? " - " : " + ";
    }
    first = false;
    if (factors.empty()) {
      out += format_number(mag);
    } else if (mag == 1.0) {
      out += factors;
    } else {
      out += format_number(mag) + "*" + factors;
    }
  }
  return out;
}

bool operator==(const QuasiTrigPoly& a, const QuasiTrigPoly& b) {
  return std::equal(a.terms_.begin(), a.terms_.end(), b.terms_.begin(), b.terms_.end(),
                    [](const TrigTerm& x, const TrigTerm& y) { return key(x) == key(y) && x.coef == y.coef; });
}

QuasiTrigPoly qtp_mul(const QuasiTrigPoly& a, const QuasiTrigPoly& b) { return a * b; }
QuasiTrigPoly qtp_antiderivative(const QuasiTrigPoly& f) { return f.antiderivative(); }

}  // namespace endpt
