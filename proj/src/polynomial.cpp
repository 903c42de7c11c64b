#include "endpt/polynomial.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "endpt/errors.hpp"

namespace endpt {

namespace {

template <class S>
S int_pow(S base, unsigned e) {
  S r = 1;
  while (e != 0U) {
    if ((e & 1U) != 0U) r *= base;
    base *= base;
    e >>= 1U;
  }
  return r;
}

}  // namespace

std::string format_number(double c) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), c);
  if (ec != std::errc{}) throw std::logic_error("format_number: to_chars failed");
  return {buf.data(), end};
}

Polynomial::Polynomial(std::size_t nvars) : nvars_(nvars) {}

Polynomial Polynomial::constant(std::size_t nvars, double c) {
  Polynomial p(nvars);
  p.add_term(Exponent(nvars + 1, 0U), c);
  return p;
}

Polynomial Polynomial::variable(std::size_t nvars, std::size_t var) {
  if (var > nvars) throw ValidationError("Polynomial::variable: index out of range");
  Exponent e(nvars + 1, 0U);
  e[var] = 1;
  Polynomial p(nvars);
  p.add_term(e, 1.0);
  return p;
}

Polynomial Polynomial::monomial(std::size_t nvars, Exponent e, double c) {
  if (e.size() != nvars + 1) throw ValidationError("Polynomial::monomial: exponent length mismatch");
  Polynomial p(nvars);
  p.add_term(e, c);
  return p;
}

void Polynomial::add_term(const Exponent& e, double c) {
  if (c == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(e, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

void Polynomial::check_same_space(const Polynomial& o) const {
  if (o.nvars_ != nvars_) {
    throw ValidationError("polynomial dimension mismatch: " + std::to_string(nvars_) + " vs " +
                          std::to_string(o.nvars_));
  }
}

int Polynomial::degree() const {
  int d = -1;
  for (const auto& [e, c] : terms_) {
    int s = 0;
    for (unsigned k : e) s += static_cast<int>(k);
    d = std::max(d, s);
  }
  return d;
}

unsigned Polynomial::time_degree() const {
  unsigned d = 0;
  for (const auto& [e, c] : terms_) d = std::max(d, e.back());
  return d;
}

bool Polynomial::depends_on_state() const {
  return std::any_of(terms_.begin(), terms_.end(), [](const auto& term) {
    return std::any_of(term.first.begin(), term.first.end() - 1, [](unsigned k) { return k != 0; });
  });
}

double Polynomial::coefficient(const Exponent& e) const {
  auto it = terms_.find(e);
  return it == terms_.end() ? 0.0 : it->second;
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  check_same_space(o);
  for (const auto& [e, c] : o.terms_) add_term(e, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  check_same_space(o);
  for (const auto& [e, c] : o.terms_) add_term(e, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double c) {
  if (c == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto it = terms_.begin(); it != terms_.end();) {
    it->second *= c;
    it = it->second == 0.0 ? terms_.erase(it) : std::next(it);
  }
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  a.check_same_space(b);
  Polynomial r(a.nvars_);
  Polynomial::Exponent e(a.nvars_ + 1);
  for (const auto& [ea, ca] : a.terms_) {
    for (const auto& [eb, cb] : b.terms_) {
      for (std::size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
      r.add_term(e, ca * cb);
    }
  }
  return r;
}

Polynomial Polynomial::pow(unsigned k) const {
  Polynomial r = constant(nvars_, 1.0);
  Polynomial base = *this;
  while (k != 0U) {
    if ((k & 1U) != 0U) r = r * base;
    k >>= 1U;
    if (k != 0U) base = base * base;
  }
  return r;
}

Polynomial Polynomial::partial(std::size_t var) const {
  if (var > nvars_) throw ValidationError("Polynomial::partial: index out of range");
  Polynomial r(nvars_);
  for (const auto& [e, c] : terms_) {
    if (e[var] == 0U) continue;
    Exponent d = e;
    --d[var];
    r.add_term(d, c * static_cast<double>(e[var]));
  }
  return r;
}

Polynomial Polynomial::antiderivative_time() const {
  Polynomial r(nvars_);
  for (const auto& [e, c] : terms_) {
    Exponent d = e;
    ++d.back();
    r.add_term(d, c / static_cast<double>(d.back()));
  }
  return r;
}

double Polynomial::eval(std::span<const double> x, double t) const {
  if (x.size() < nvars_) throw ValidationError("Polynomial::eval: too few coordinates");
  double s = 0.0;
  for (const auto& [e, c] : terms_) {
    double m = c;
    for (std::size_t i = 0; i < nvars_; ++i) {
      if (e[i] != 0U) m *= int_pow(x[i], e[i]);
    }
    if (e.back() != 0U) m *= int_pow(t, e.back());
    s += m;
  }
  return s;
}

long double Polynomial::eval_ld(std::span<const long double> x, long double t) const {
  if (x.size() < nvars_) throw ValidationError("Polynomial::eval: too few coordinates");
  long double s = 0.0L;
  for (const auto& [e, c] : terms_) {
    long double m = c;
    for (std::size_t i = 0; i < nvars_; ++i) {
      if (e[i] != 0U) m *= int_pow(x[i], e[i]);
    }
    if (e.back() != 0U) m *= int_pow(t, e.back());
    s += m;
  }
  return s;
}

Polynomial Polynomial::compose(std::span<const Polynomial> state_subs,
                               const Polynomial& time_sub) const {
  if (state_subs.size() != nvars_) throw ValidationError("Polynomial::compose: wrong substitute count");
  const std::size_t m = time_sub.nvars();
  for (const auto& s : state_subs) time_sub.check_same_space(s);

  // Powers of each substitute, built on demand.
  std::vector<std::vector<Polynomial>> powers(nvars_ + 1);
  auto power_of = [&](std::size_t i, unsigned k) -> const Polynomial& {
    auto& cache = powers[i];
    const Polynomial& base = i < nvars_ ? state_subs[i] : time_sub;
    if (cache.empty()) cache.push_back(constant(m, 1.0));
    while (cache.size() <= k) cache.push_back(cache.back() * base);
    return cache[k];
  };

  Polynomial r(m);
  for (const auto& [e, c] : terms_) {
    Polynomial term = constant(m, c);
    for (std::size_t i = 0; i <= nvars_; ++i) {
      if (e[i] != 0U) term = term * power_of(i, e[i]);
    }
    r += term;
  }
  return r;
}

double Polynomial::max_abs_coefficient() const {
  double m = 0.0;
  for (const auto& [e, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

Polynomial Polynomial::pruned(double tol) const {
  const double cut = tol * std::max(1.0, max_abs_coefficient());
  Polynomial r(nvars_);
  for (const auto& [e, c] : terms_) {
    if (std::abs(c) > cut) r.terms_.emplace(e, c);
  }
  return r;
}

bool Polynomial::approx_equal(const Polynomial& o, double rel_tol) const {
  check_same_space(o);
  Polynomial diff = *this - o;
  const double scale = std::max({1.0, max_abs_coefficient(), o.max_abs_coefficient()});
  return diff.max_abs_coefficient() <= rel_tol * scale;
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::string out;
  bool first = true;
  for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
    const auto& [e, c] = *it;
    std::string mono;
    for (std::size_t i = 0; i <= nvars_; ++i) {
      if (e[i] == 0U) continue;
      if (!mono.empty()) mono += '*';
      mono += i < nvars_ ? "x" + std::to_string(i + 1) : std::string("t");
      if (e[i] > 1U) mono += "^" + std::to_string(e[i]);
    }
    const double mag = std::abs(c);
    if (first) {
      if (c < 0) out += '-';
    } else {
      out += c < 0 ? " - " : " + ";
    }
    first = false;
    if (mono.empty()) {
      out += format_number(mag);
    } else if (mag == 1.0) {
      out += mono;
    } else {
      out += format_number(mag) + "*" + mono;
    }
  }
  return out;
}

}  // namespace endpt
