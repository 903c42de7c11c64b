#ifndef ENDPT_JET_HPP
#define ENDPT_JET_HPP

#include <array>
#include <cstddef>

namespace endpt {

/// Truncated power series c[0] + c[1] s + ... + c[K] s^K over the scalar type T.
template <class T, std::size_t K>
struct Jet {
  std::array<T, K + 1> c{};

  Jet() = default;
  Jet(T value) { c[0] = value; }  // NOLINT: implicit lift of constants

  static Jet variable(T value, T slope) {
    Jet j(value);
    if constexpr (K >= 1) j.c[1] = slope;
    return j;
  }

  Jet& operator+=(const Jet& o) {
    for (std::size_t i = 0; i <= K; ++i) c[i] += o.c[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (std::size_t i = 0; i <= K; ++i) c[i] -= o.c[i];
    return *this;
  }
  Jet& operator*=(const Jet& o) { return *this = *this * o; }
  Jet operator-() const {
    Jet r;
    for (std::size_t i = 0; i <= K; ++i) r.c[i] = -c[i];
    return r;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    for (std::size_t i = 0; i <= K; ++i) {
      if (a.c[i] == T(0)) continue;
      for (std::size_t j = 0; i + j <= K; ++j) r.c[i + j] += a.c[i] * b.c[j];
    }
    return r;
  }
  friend Jet operator*(const Jet& a, T s) {
    Jet r = a;
    for (auto& x : r.c) x *= s;
    return r;
  }
  friend Jet operator*(T s, const Jet& a) { return a * s; }
};

/// Largest coefficient magnitude, used as a norm in convergence tests.
template <class T, std::size_t K>
T jet_magnitude(const Jet<T, K>& j) {
  T m(0);
  for (const auto& x : j.c) {
    const T a = x < T(0) ? -x : x;
    if (a > m) m = a;
  }
  return m;
}

}  // namespace endpt

#endif  // ENDPT_JET_HPP
