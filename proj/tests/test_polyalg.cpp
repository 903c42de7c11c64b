#include <doctest.h>

#include <random>

#include "endpt/builtin.hpp"
#include "endpt/errors.hpp"
#include "endpt/vector_field.hpp"
#include "generators.hpp"

using namespace endpt;

namespace {

using testgen::fd_bracket;

}  // namespace

TEST_CASE("poly_arith examples") {
  const Polynomial x1 = Polynomial::variable(3, 0);
  CHECK(x1 * x1 == Polynomial::parse("x1^2", 3));

  const Polynomial a = Polynomial::parse("1 - x1", 3);
  const Polynomial b = Polynomial::parse("x1^3", 3);
  const Polynomial prod = a * b;
  // Oracle: direct float product at random points.
  std::mt19937_64 rng(11);
  for (int i = 0; i < 5; ++i) {
    const Eigen::VectorXd q = testgen::random_point(rng, 3, 2.0);
    std::span<const double> x(q.data(), 3);
    CHECK(prod.eval(x, 0.3) == doctest::Approx(a.eval(x, 0.3) * b.eval(x, 0.3)).epsilon(1e-14));
  }
  CHECK(prod == Polynomial::parse("x1^3 - x1^4", 3));

  const Polynomial p = Polynomial::parse("3*x2*t - 2", 3);
  CHECK(p + Polynomial(3) == p);
  CHECK_THROWS_AS(p + Polynomial(2), ValidationError);
}

TEST_CASE("poly_partial examples") {
  const Polynomial c = Polynomial::parse("x1^3", 3);
  CHECK(c.partial(0) == Polynomial::parse("3*x1^2", 3));
  CHECK(c.partial(1).is_zero());
  const Polynomial d = Polynomial::parse("(t - 1)*x1^3", 3);
  CHECK(d.partial(3) == c);
  CHECK_THROWS_AS(c.partial(4), ValidationError);
}

TEST_CASE("canonical text round-trips") {
  for (const char* s : {"(1 - x1)", "x1^3", "-3*(t-1)*x1^2 + 0.25*x2*x3^2", "0", "2.5e-3*t^4 - x3"}) {
    const Polynomial p = Polynomial::parse(s, 3);
    CHECK(Polynomial::parse(p.to_string(), 3) == p);
  }
  CHECK(Polynomial::parse("x1^2", 3).to_string() == "x1^2");
  CHECK(Polynomial::parse("1 - x1", 3).to_string() == "-x1 + 1");
}

TEST_CASE("malformed polynomials are rejected") {
  CHECK_THROWS_AS(Polynomial::parse("x1^^2", 3), ParseError);
  CHECK_THROWS_AS(Polynomial::parse("2x1", 3), ParseError);
  CHECK_THROWS_AS(Polynomial::parse("x4", 3), ParseError);
  CHECK_THROWS_AS(Polynomial::parse("x1^-1", 3), ParseError);
  CHECK_THROWS_AS(Polynomial::parse("(x1 + 1", 3), ParseError);
  try {
    (void)Polynomial::parse("x1 + *", 3);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.column() == 6);
  }
}

TEST_CASE("lie_bracket examples") {
  const auto f = builtin::example_fields(3);
  const PolyVectorField b12 = lie_bracket(f[0], f[1]);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10; ++i) {
    const Eigen::VectorXd q = testgen::random_point(rng, 3);
    CHECK((b12.eval(q, 0.0) - fd_bracket(f[0], f[1], q, 0.0)).norm() < 1e-6);
  }
  CHECK(b12 == PolyVectorField::parse({"0", "-1", "3*x1^2"}, 3));

  const PolyVectorField b212 = lie_bracket(f[1], lie_bracket(f[1], f[0]));
  for (int i = 0; i < 10; ++i) {
    const Eigen::VectorXd q = testgen::random_point(rng, 3);
    CHECK(fd_bracket(f[1], lie_bracket(f[1], f[0]), q, 0.0).norm() < 1e-6);
  }
  CHECK(b212.is_zero());
}

TEST_CASE("bracket of time-frozen pullback fields") {
  // Variables x1..x3 move, x4 = t2 and x5 = t3 are frozen parameters.
  const std::size_t nv = 5;
  auto g1 = [&](const char* tau) {
    const std::string s(tau);
    return PolyVectorField({Polynomial::parse("1", nv), Polynomial::parse(s + " - 1", nv),
                            Polynomial::parse("-3*(" + s + " - 1)*x1^2", nv)});
  };
  const PolyVectorField b = lie_bracket(g1("x4"), g1("x5"));
  // Oracle: finite differences with the parameters held fixed.
  std::mt19937_64 rng(9);
  for (int i = 0; i < 10; ++i) {
    const Eigen::VectorXd q = testgen::random_point(rng, nv);
    const auto X = g1("x4");
    const auto Y = g1("x5");
    Eigen::VectorXd fd = Eigen::VectorXd::Zero(3);
    const double h = 1e-5;
    Eigen::MatrixXd DX(3, 3);
    Eigen::MatrixXd DY(3, 3);
    for (int j = 0; j < 3; ++j) {
      Eigen::VectorXd qp = q;
      Eigen::VectorXd qm = q;
      qp[j] += h;
      qm[j] -= h;
      DX.col(j) = (X.eval(qp, 0) - X.eval(qm, 0)) / (2 * h);
      DY.col(j) = (Y.eval(qp, 0) - Y.eval(qm, 0)) / (2 * h);
    }
    fd = DY * X.eval(q, 0) - DX * Y.eval(q, 0);
    CHECK((b.eval(q, 0) - fd).norm() < 1e-6);
  }
  CHECK(b == PolyVectorField({Polynomial(nv), Polynomial(nv), Polynomial::parse("6*x1*x4 - 6*x1*x5", nv)}));
}

TEST_CASE("vf_eval examples") {
  const auto f = builtin::example_fields(3);
  const Eigen::Vector3d q1(0, 1, 0);
  CHECK(f[1].eval(q1, 0.0).isApprox(Eigen::Vector3d(0, 1, 0)));
  CHECK(f[0].eval(Eigen::Vector3d(0.3, -2, 5), 0.7).isApprox(Eigen::Vector3d(1, 0, 0)));
  for (double t : {0.0, 0.4, 1.0}) {
    CHECK(lie_bracket(f[0], f[1]).eval(Eigen::Vector3d(0, t, 0), t).isApprox(Eigen::Vector3d(0, -1, 0)));
  }
}

TEST_CASE("zero field is accepted everywhere") {
  const PolyVectorField z = PolyVectorField::zero(3);
  const auto f = builtin::example_fields(2);
  CHECK(lie_bracket(z, f[1]).is_zero());
  CHECK(z.eval(Eigen::Vector3d(1, 2, 3), 0).isZero());
  CHECK(z.apply(Polynomial::parse("x1*x2", 3)).is_zero());
}

TEST_CASE("property: antisymmetry and Jacobi hold exactly") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> dimd(1, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = dimd(rng);
    const auto X = testgen::random_int_field(rng, n, 3, 3);
    const auto Y = testgen::random_int_field(rng, n, 3, 3);
    const auto Z = testgen::random_int_field(rng, n, 3, 3);
    CHECK((lie_bracket(X, Y) + lie_bracket(Y, X)).is_zero());
    const auto jac = lie_bracket(X, lie_bracket(Y, Z)) + lie_bracket(Y, lie_bracket(Z, X)) +
                     lie_bracket(Z, lie_bracket(X, Y));
    CHECK(jac.is_zero());
  }
}

TEST_CASE("property: Leibniz rule") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const auto X = testgen::random_int_field(rng, 3, 3, 3);
    const auto p = testgen::random_int_poly(rng, 3, 3, 4, true);
    const auto q = testgen::random_int_poly(rng, 3, 3, 4, true);
    CHECK(X.apply(p * q) == X.apply(p) * q + p * X.apply(q));
  }
}

TEST_CASE("property: bracket agrees with finite differences") {
  std::mt19937_64 rng(31);
  const auto X = testgen::random_int_field(rng, 3, 3, 4);
  const auto Y = testgen::random_int_field(rng, 3, 3, 4);
  const auto B = lie_bracket(X, Y);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd q = testgen::random_point(rng, 3);
    const Eigen::VectorXd fd = fd_bracket(X, Y, q, 0.0);
    CHECK((B.eval(q, 0.0) - fd).norm() <= 1e-6 * std::max(1.0, fd.norm()));
  }
}
