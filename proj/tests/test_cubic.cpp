#include <doctest.h>

#include <random>

#include "endpt/builtin.hpp"
#include "endpt/cubic.hpp"
#include "endpt/errors.hpp"
#include "generators.hpp"

using namespace endpt;

namespace {

SymmetricTrilinear cubic(const std::vector<std::string>& comps, std::size_t N) {
  std::vector<Polynomial> p;
  for (const auto& c : comps) p.push_back(Polynomial::parse(c, N));
  return SymmetricTrilinear::from_cubic(p);
}

SymmetricTrilinear random_tensor(std::mt19937_64& rng, std::size_t n, std::size_t N) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<std::vector<std::vector<double>>>> raw(
      n, std::vector<std::vector<std::vector<double>>>(N, std::vector<std::vector<double>>(N, std::vector<double>(N))));
  for (auto& A : raw)
    for (auto& B : A)
      for (auto& C : B)
        for (auto& x : C) x = u(rng);
  return SymmetricTrilinear::symmetrized(raw);
}

}  // namespace

TEST_CASE("cubic_eval_and_diff examples") {
  const auto T = cubic({"x1^3"}, 1);
  const auto j = cubic_eval_and_diff(T, Eigen::VectorXd::Constant(1, 2.0));
  CHECK(j.value(0) == doctest::Approx(8.0));
  CHECK(j.jacobian(0, 0) == doctest::Approx(12.0));
  CHECK(j.hessian[0](0, 0) == doctest::Approx(12.0));

  const auto H = cubic({"x1^3 - 3*x1*x2^2"}, 2);
  const auto h = cubic_eval_and_diff(H, Eigen::Vector2d(0, 1));
  CHECK(std::abs(h.value(0)) < 1e-15);
  CHECK(h.jacobian(0, 0) == doctest::Approx(-3.0));
  CHECK(std::abs(h.jacobian(0, 1)) < 1e-15);

  const auto z = cubic_eval_and_diff(H, Eigen::Vector2d::Zero());
  CHECK(z.value.norm() == 0.0);
  CHECK(z.jacobian.norm() == 0.0);
  CHECK(z.hessian[0].norm() == 0.0);

  CHECK_THROWS_AS(cubic_eval_and_diff(H, Eigen::Vector3d::Zero()), ValidationError);
  CHECK_THROWS_AS(cubic({"x1^2"}, 1), ValidationError);
}

TEST_CASE("tensor JSON load symmetrizes") {
  const auto T = SymmetricTrilinear::from_json("[[[[0,6],[0,0]],[[0,0],[0,0]]]]");
  CHECK(T.n() == 1);
  CHECK(T.N() == 2);
  CHECK(T.max_asymmetry() == 0.0);
  // The raw entry is spread over its three distinct orderings; P(x, y) = 6 x^2 y either way.
  CHECK(T(0, 0, 0, 1) == doctest::Approx(2.0));
  CHECK(T(0, 1, 0, 0) == doctest::Approx(2.0));
  CHECK(cubic_eval_and_diff(T, Eigen::Vector2d(1, 2)).value(0) == doctest::Approx(12.0));
  CHECK_THROWS_AS(SymmetricTrilinear::from_json("[[[[1,2],[3]]]]"), ValidationError);
  CHECK_THROWS_AS(SymmetricTrilinear::from_json("[[[[1,"), ValidationError);
  CHECK_THROWS_AS(SymmetricTrilinear::from_json("{\"a\": 1}"), ValidationError);
}

TEST_CASE("regular_zero_search examples") {
  const auto H = cubic({"x1^3 - 3*x1*x2^2"}, 2);
  const auto z = regular_zero_search(H);
  REQUIRE(z.has_value());
  CHECK(cubic_eval_and_diff(H, z->v).value.norm() <= 1e-10);
  CHECK(z->sigma_min >= 1e-6);
  CHECK(std::abs(z->v.norm() - 1.0) < 1e-14);

  CHECK_FALSE(regular_zero_search(cubic({"x1^3"}, 1)).has_value());
  CHECK_FALSE(regular_zero_search(SymmetricTrilinear(1, 3)).has_value());
  // Perfect cube in two variables: zeros exist but none is regular.
  CHECK_FALSE(regular_zero_search(cubic({"(x1 + 2*x2)^3"}, 2)).has_value());
}

TEST_CASE("common_isotropic_test examples") {
  const std::vector<Eigen::MatrixXd> pair{Eigen::Matrix2d{{1, 0}, {0, -1}}, Eigen::Matrix2d{{0, 1}, {1, 0}}};
  CHECK_FALSE(common_isotropic_test(pair).has_value());

  const std::vector<Eigen::MatrixXd> same{Eigen::Matrix2d{{1, 0}, {0, 0}}, Eigen::Matrix2d{{1, 0}, {0, 0}}};
  const auto w = common_isotropic_test(same);
  REQUIRE(w.has_value());
  CHECK(std::abs(std::abs((*w)(1)) - 1.0) < 1e-6);

  const auto xyz = cubic({"x1*x2*x3"}, 3);
  const auto x = common_isotropic_test(xyz, Eigen::VectorXd::Constant(1, 1.0));
  REQUIRE(x.has_value());
  // Each form is 2 x_j x_k; a witness has at most one nonzero coordinate.
  CHECK(std::abs((*x)(0) * (*x)(1)) + std::abs((*x)(1) * (*x)(2)) + std::abs((*x)(0) * (*x)(2)) < 1e-6);
  CHECK_THROWS_AS(common_isotropic_test(xyz, Eigen::VectorXd::Zero(1)), ValidationError);
}

TEST_CASE("property: finite-difference gradient matches dP") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const auto T = random_tensor(rng, 2, 3);
    const Eigen::VectorXd v = testgen::random_point(rng, 3);
    const auto j = cubic_eval_and_diff(T, v);
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < 3; ++i) {
      const Eigen::VectorXd e = Eigen::VectorXd::Unit(3, i) * h;
      const Eigen::VectorXd fd = (T.apply(v + e, v + e, v + e) - T.apply(v - e, v - e, v - e)) / (2 * h);
      CHECK((fd - j.jacobian.col(i)).norm() < 1e-6);
    }
    // Second differential column against differences of the Jacobian.
    for (Eigen::Index i = 0; i < 3; ++i) {
      const Eigen::VectorXd e = Eigen::VectorXd::Unit(3, i) * h;
      const Eigen::MatrixXd dJ =
          (cubic_eval_and_diff(T, v + e).jacobian - cubic_eval_and_diff(T, v - e).jacobian) / (2 * h);
      for (std::size_t a = 0; a < 2; ++a)
        CHECK((dJ.row(static_cast<Eigen::Index>(a)).transpose() - j.hessian[a].col(i)).norm() < 1e-6);
    }
  }
}

TEST_CASE("property: symmetrization is idempotent") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    const auto T = random_tensor(rng, 2, 4);
    CHECK(T.max_asymmetry() < 1e-15);
    const auto S = T.symmetrize();
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
          for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(S(a, i, j, k) - T(a, i, j, k)) < 1e-15);
  }
}

TEST_CASE("property: cycling identity lambda T(u, v, w) = <u, lambda L(v) w> / 6") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const auto T = random_tensor(rng, 3, 4);
    const Eigen::VectorXd u = testgen::random_point(rng, 4);
    const Eigen::VectorXd v = testgen::random_point(rng, 4);
    const Eigen::VectorXd w = testgen::random_point(rng, 4);
    const Eigen::VectorXd l = testgen::random_point(rng, 3);
    const auto L = third_diff_map(T, v);
    Eigen::MatrixXd lL = Eigen::MatrixXd::Zero(4, 4);
    for (Eigen::Index a = 0; a < 3; ++a) lL += l(a) * L[static_cast<std::size_t>(a)];
    const double lhs = l.dot(T.apply(u, v, w));
    CHECK(std::abs(lhs - u.dot(lL * w) / 6.0) < 1e-12);
    // Cycled arguments give the same value.
    CHECK(std::abs(lhs - l.dot(T.apply(v, w, u))) < 1e-12);
    CHECK(std::abs(lhs - l.dot(T.apply(w, u, v))) < 1e-12);
  }
}

TEST_CASE("property: returned regular zeros are certified") {
  std::mt19937_64 rng(34);
  int found = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto T = random_tensor(rng, 2, 4);
    SearchOptions o;
    o.attempts = 20;
    o.seed = static_cast<std::uint64_t>(trial);
    const auto z = regular_zero_search(T, o);
    if (!z) continue;
    ++found;
    const auto j = cubic_eval_and_diff(T, z->v);
    CHECK(j.value.norm() <= 1e-10);
    CHECK(Eigen::JacobiSVD<Eigen::MatrixXd>(j.jacobian).singularValues().minCoeff() >=
          1e-6 * std::max(1.0, T.frobenius_norm()));
  }
  // N = 4 >= n + 1, so zeros exist; the search finds them for generic tensors.
  CHECK(found >= 8);
}

TEST_CASE("w0_regular_zero_check") {
  const EndpointProblem P(builtin::example_fields(3), builtin::example_control(), builtin::example_q0());
  const auto lambdas = P.cokernel().lambdas;
  const ControlSignal w0 = ControlSignal::zero(2);
  const auto v = w0_regular_zero_check(P, lambdas, w0, builtin::example_perturbation(), P.probes());
  CHECK(v.status == W0Status::certified);
  CHECK(v.route == "corank-one");
  CHECK_FALSE(v.regular_zero);
  CHECK(v.image_dim == 0);
  CHECK(v.second_coker_dim == 1);
  CHECK(v.third_projection == doctest::Approx(15.0).epsilon(1e-9));
  CHECK(v.surjectivity_sigma > 1e-3);
  CHECK(v.domain_dim > 0);

  // Not isotropic: at p = 2 the Hessian of the perturbation is 3.
  const EndpointProblem P2(builtin::example_fields(2), builtin::example_control(), builtin::example_q0());
  const auto bad =
      w0_regular_zero_check(P2, P2.cokernel().lambdas, builtin::example_perturbation(), w0, P2.probes());
  CHECK(bad.status == W0Status::precondition_failed);

  // Flat fields: every bracket vanishes, so the third differential is zero on the probes.
  const std::vector<PolyVectorField> flat{PolyVectorField::coordinate(3, 0), PolyVectorField::coordinate(3, 1)};
  const EndpointProblem F(flat, builtin::example_control(), Eigen::Vector3d::Zero());
  REQUIRE(F.cokernel().corank() == 1);
  const auto z = w0_regular_zero_check(F, F.cokernel().lambdas, w0, ControlSignal::parse({"sin(2*pi*t)", "0"}),
                                       F.probes());
  CHECK(z.status == W0Status::not_certified);
  CHECK(z.third_projection == 0.0);
}
