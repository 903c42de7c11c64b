#include <array>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <algorithm>
#include <cmath>

#include "endpt/endpoint.hpp"
#include "endpt/errors.hpp"

namespace endpt {

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
constexpr unsigned max_depth = 12;

// Bisection with a mixed budget: tol times max(interval length, L1 of the piece).
// Boost's purely relative criterion stalls on inner integrals that are tiny near s = 0.
template <class F>
double adaptive(const F& f, double a, double b, double tol, unsigned depth, double& err) {
  double e = 0.0;
  double l1 = 0.0;
  const double v = GK::integrate(f, a, b, 0, 0.0, &e, &l1);
  if (e <= tol * std::max(b - a, l1) || depth == 0) {
    err += e;
    return v;
  }
  const double m = 0.5 * (a + b);
  return adaptive(f, a, m, tol, depth - 1, err) + adaptive(f, m, b, tol, depth - 1, err);
}

struct Nested {
  const std::function<double(std::span<const double>)>& f;
  int d;
  double tol;
  std::array<double, 3> s{};
  double outer_error = 0.0;

  // Integrates over s_level in [0, upper] with the outer variables already fixed.
  double level(int lvl, double upper) {
    if (upper <= 0.0) return 0.0;
    double err = 0.0;
    const double v = adaptive(
        [&](double x) {
          s[static_cast<std::size_t>(lvl)] = x;
          if (lvl + 1 == d) return f(std::span<const double>(s.data(), static_cast<std::size_t>(d)));
          return level(lvl + 1, x);
        },
        0.0, upper, tol, max_depth, err);
    if (lvl == 0) outer_error = err;
    return v;
  }
};

}  // namespace

SimplexResult simplex_integrate(const std::function<double(std::span<const double>)>& integrand, int d,
                                double tol) {
  if (d < 1 || d > 3) throw ValidationError("simplex_integrate supports orders 1 to 3");
  Nested n{integrand, d, tol};
  const double v = n.level(0, 1.0);
  if (!std::isfinite(v)) throw NumericError("simplex_integrate: non-finite result");
  return {v, n.outer_error};
}

double simplex_closed_form(const Polynomial& kernel, std::span<const QuasiTrigPoly> signals) {
  const std::size_t d = signals.size();
  if (kernel.nvars() != d) throw ValidationError("simplex_closed_form: kernel variables do not match order");
  double total = 0.0;
  for (const auto& [e, c] : kernel.terms()) {
    if (e[d] != 0) throw ValidationError("simplex_closed_form: kernel must not depend on t");
    // Innermost variable s_d first; each antiderivative vanishes at 0.
    QuasiTrigPoly inner = QuasiTrigPoly::constant(1.0);
    for (std::size_t r = d; r-- > 0;) {
      inner = (signals[r] * QuasiTrigPoly::monomial(e[r]) * inner).antiderivative();
    }
    total += c * inner(1.0);
  }
  return total;
}

}  // namespace endpt
