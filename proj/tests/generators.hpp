#ifndef ENDPT_TESTS_GENERATORS_HPP
#define ENDPT_TESTS_GENERATORS_HPP

// Hand-rolled random generators for property tests; fixed seeds keep runs reproducible.

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "endpt/polynomial.hpp"
#include "endpt/signals.hpp"
#include "endpt/vector_field.hpp"

namespace endpt::testgen {

inline Polynomial random_int_poly(std::mt19937_64& rng, std::size_t nvars, unsigned max_deg, int max_terms,
                                  bool with_time = false) {
  std::uniform_int_distribution<int> coef(-4, 4);
  std::uniform_int_distribution<int> nterms(0, max_terms);
  std::uniform_int_distribution<unsigned> ex(0, max_deg);
  Polynomial p(nvars);
  const int m = nterms(rng);
  for (int i = 0; i < m; ++i) {
    Polynomial::Exponent e(nvars + 1, 0U);
    unsigned budget = ex(rng);
    for (unsigned b = 0; b < budget; ++b) {
      std::uniform_int_distribution<std::size_t> slot(0, with_time ? nvars : nvars - 1);
      ++e[slot(rng)];
    }
    p += Polynomial::monomial(nvars, e, coef(rng));
  }
  return p;
}

inline PolyVectorField random_int_field(std::mt19937_64& rng, std::size_t dim, unsigned max_deg, int max_terms) {
  std::vector<Polynomial> c;
  for (std::size_t i = 0; i < dim; ++i) c.push_back(random_int_poly(rng, dim, max_deg, max_terms));
  return PolyVectorField(std::move(c));
}

inline Eigen::VectorXd random_point(std::mt19937_64& rng, std::size_t n, double r = 1.0) {
  std::uniform_real_distribution<double> u(-r, r);
  Eigen::VectorXd q(static_cast<Eigen::Index>(n));
  for (auto& x : q) x = u(rng);
  return q;
}

/// Random QuasiTrigPoly with powers <= max_pow and frequencies <= max_freq.
inline QuasiTrigPoly random_qtp(std::mt19937_64& rng, unsigned max_pow, unsigned max_freq, int nterms = 4) {
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  std::uniform_int_distribution<unsigned> pw(0, max_pow);
  std::uniform_int_distribution<unsigned> fr(0, max_freq);
  std::bernoulli_distribution sn(0.5);
  std::vector<TrigTerm> t;
  for (int i = 0; i < nterms; ++i) t.push_back({coef(rng), pw(rng), fr(rng), sn(rng) ? Phase::sin : Phase::cos});
  return QuasiTrigPoly(std::move(t));
}

// Oracle: [X,Y](q) = DY(q) X(q) - DX(q) Y(q) with central differences of field values.
inline Eigen::VectorXd fd_bracket(const PolyVectorField& X, const PolyVectorField& Y, const Eigen::VectorXd& q,
                           double t) {
  const double h = 1e-5;
  const auto n = q.size();
  Eigen::MatrixXd DX(n, n);
  Eigen::MatrixXd DY(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd qp = q;
    Eigen::VectorXd qm = q;
    qp[j] += h;
    qm[j] -= h;
    DX.col(j) = (X.eval(qp, t) - X.eval(qm, t)) / (2 * h);
    DY.col(j) = (Y.eval(qp, t) - Y.eval(qm, t)) / (2 * h);
  }
  return DY * X.eval(q, t) - DX * Y.eval(q, t);
}

}  // namespace endpt::testgen

#endif  // ENDPT_TESTS_GENERATORS_HPP
