#ifndef ENDPT_SRC_COLLOCATION_HPP
#define ENDPT_SRC_COLLOCATION_HPP

// Gauss-Legendre collocation for dq/dt = sum_i u_i(t) f_i(q, t) over a generic scalar type.
// Instantiated for long double, __float128 and Jet<__float128, K>.

#include <quadmath.h>

#include <cmath>
#include <string>
#include <vector>

#include "endpt/errors.hpp"
#include "endpt/jet.hpp"
#include "endpt/signals.hpp"
#include "endpt/vector_field.hpp"

namespace endpt::detail {

inline long double tsin(long double x) { return std::sin(x); }
inline long double tcos(long double x) { return std::cos(x); }
inline __float128 tsin(__float128 x) { return sinq(x); }
inline __float128 tcos(__float128 x) { return cosq(x); }
template <class T>
T pi_v();
template <>
inline long double pi_v<long double>() { return 3.141592653589793238462643383279502884L; }
template <>
inline __float128 pi_v<__float128>() {
  static const __float128 pi = acosq(-1);
  return pi;
}

template <class T>
T tabs(T x) { return x < T(0) ? -x : x; }

template <class T>
T magnitude(const T& x) { return tabs(x); }
template <class T, std::size_t K>
T magnitude(const Jet<T, K>& x) { return jet_magnitude(x); }

template <class T>
bool finite(const T& x) { return x == x && tabs(x) < T(1e300); }
template <class T, std::size_t K>
bool finite(const Jet<T, K>& x) {
  for (const auto& c : x.c)
    if (!finite(c)) return false;
  return true;
}

template <class T>
T qtp_value(const QuasiTrigPoly& q, T t) {
  T s(0);
  for (const auto& term : q.terms()) {
    T v = T(term.coef);
    for (unsigned p = 0; p < term.power; ++p) v *= t;
    if (term.freq != 0) {
      const T arg = T(2) * pi_v<T>() * T(term.freq) * t;
      v *= term.phase == Phase::cos ? tcos(arg) : tsin(arg);
    } else if (term.phase == Phase::sin) {
      v = T(0);
    }
    s += v;
  }
  return s;
}

/// Nodes c, weights b and matrix A of the s-stage Gauss-Legendre method on [0, 1].
template <class T>
struct GaussLegendre {
  std::vector<T> c, b;
  std::vector<std::vector<T>> A;

  explicit GaussLegendre(unsigned s) : c(s), b(s), A(s, std::vector<T>(s)) {
    for (unsigned i = 0; i < s; ++i) {
      // Newton on P_s from the Chebyshev-like guess.
      T x = T(std::cos(3.14159265358979323846 * (i + 0.75) / (s + 0.5)));
      T dp(0);
      for (int it = 0; it < 100; ++it) {
        T p0(1), p1 = x;
        for (unsigned k = 2; k <= s; ++k) {
          const T p2 = (T(2 * k - 1) * x * p1 - T(k - 1) * p0) / T(k);
          p0 = p1;
          p1 = p2;
        }
        const T pn = s == 1 ? x : p1;
        const T pm = s == 1 ? T(1) : p0;
        dp = T(s) * (x * pn - pm) / (x * x - T(1));
        const T dx = pn / dp;
        x -= dx;
        if (tabs(dx) < T(1e-40)) break;
      }
      c[i] = (T(1) - x) / T(2);
      b[i] = T(1) / ((T(1) - x * x) * dp * dp);
    }
    // a_ij = int_0^{c_i} L_j; the s-point rule integrates L_j exactly.
    for (unsigned i = 0; i < s; ++i)
      for (unsigned j = 0; j < s; ++j) {
        T acc(0);
        for (unsigned k = 0; k < s; ++k) acc += b[k] * lagrange(j, c[i] * c[k]);
        A[i][j] = c[i] * acc;
      }
  }

  T lagrange(unsigned j, T x) const {
    T v(1);
    for (unsigned m = 0; m < c.size(); ++m)
      if (m != j) v *= (x - c[m]) / (c[j] - c[m]);
    return v;
  }
};

/// Polynomial vector fields flattened for fast evaluation at a generic scalar.
template <class T>
class CompiledFields {
 public:
  explicit CompiledFields(const std::vector<PolyVectorField>& fields) : n_(fields.front().dim()) {
    for (const auto& f : fields) {
      std::vector<std::vector<Term>> comps;
      for (const auto& p : f.components()) {
        std::vector<Term> terms;
        for (const auto& [e, c] : p.terms()) {
          terms.push_back({T(c), e});
          for (std::size_t v = 0; v <= n_; ++v) max_pow_ = std::max(max_pow_, e[v]);
        }
        comps.push_back(std::move(terms));
      }
      fields_.push_back(std::move(comps));
    }
  }

  std::size_t dim() const { return n_; }
  std::size_t k() const { return fields_.size(); }

  /// out = sum_i u[i] f_i(x, t).
  template <class S>
  void rhs(const std::vector<S>& x, T t, const S* u, std::vector<S>& out, std::vector<std::vector<S>>& pw) const {
    pw.resize(n_ + 1);
    for (std::size_t v = 0; v <= n_; ++v) {
      auto& row = pw[v];
      row.resize(max_pow_ + 1);
      row[0] = S(T(1));
      const S base = v < n_ ? x[v] : S(t);
      for (unsigned d = 1; d <= max_pow_; ++d) row[d] = row[d - 1] * base;
    }
    out.assign(n_, S(T(0)));
    for (std::size_t i = 0; i < fields_.size(); ++i) {
      for (std::size_t r = 0; r < n_; ++r) {
        S acc(T(0));
        for (const auto& term : fields_[i][r]) {
          S m(term.coef);
          for (std::size_t v = 0; v <= n_; ++v)
            if (term.e[v] != 0) m = m * pw[v][term.e[v]];
          acc += m;
        }
        out[r] += u[i] * acc;
      }
    }
  }

 private:
  struct Term {
    T coef;
    Polynomial::Exponent e;
  };
  std::size_t n_;
  unsigned max_pow_ = 0;
  std::vector<std::vector<std::vector<Term>>> fields_;
};

/**
 * Integrates from q0 over [0, 1] with `steps` uniform steps. Controls are given at
 * the collocation nodes: u[(step * s + stage) * k + i].
 */
template <class T, class S>
std::vector<S> collocate(const CompiledFields<T>& F, const GaussLegendre<T>& gl, std::size_t steps,
                         const std::vector<S>& q0, const std::vector<S>& u, T tol) {
  const std::size_t n = F.dim();
  const std::size_t s = gl.c.size();
  const std::size_t k = F.k();
  const T h = T(1) / T(steps);
  std::vector<S> y = q0;
  std::vector<std::vector<S>> Y(s, y), K(s, std::vector<S>(n)), pw;
  std::vector<S> next(n);
  for (std::size_t step = 0; step < steps; ++step) {
    const T t0 = T(step) * h;
    for (auto& Yi : Y) Yi = y;
    bool converged = false;
    for (int it = 0; it < 60 && !converged; ++it) {
      for (std::size_t i = 0; i < s; ++i) F.rhs(Y[i], t0 + gl.c[i] * h, &u[(step * s + i) * k], K[i], pw);
      T change(0);
      for (std::size_t i = 0; i < s; ++i) {
        for (std::size_t r = 0; r < n; ++r) {
          S v = y[r];
          for (std::size_t j = 0; j < s; ++j) v += (h * gl.A[i][j]) * K[j][r];
          const T d = magnitude(S(v - Y[i][r]));
          const T scale = T(1) + magnitude(v);
          if (d > change * scale) change = d / scale;
          Y[i][r] = v;
        }
      }
      converged = change <= tol;
    }
    if (!converged) throw NumericError("collocation: stage iteration did not converge at step " + std::to_string(step));
    for (std::size_t i = 0; i < s; ++i) F.rhs(Y[i], t0 + gl.c[i] * h, &u[(step * s + i) * k], K[i], pw);
    for (std::size_t r = 0; r < n; ++r) {
      S v = y[r];
      for (std::size_t i = 0; i < s; ++i) v += (h * gl.b[i]) * K[i][r];
      if (!finite(v)) throw NumericError("collocation: non-finite state");
      next[r] = v;
    }
    y = next;
  }
  return y;
}

}  // namespace endpt::detail

#endif  // ENDPT_SRC_COLLOCATION_HPP
