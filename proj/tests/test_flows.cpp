#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "endpt/builtin.hpp"
#include "endpt/errors.hpp"
#include "endpt/flows.hpp"
#include "generators.hpp"

using namespace endpt;

namespace {

// Closed form of the example flow under u = (0, 1): x1 frozen, x2 and x3 linear in time.
Eigen::Vector3d example_transport(const Eigen::Vector3d& y, double s, double t, unsigned p) {
  return {y[0], y[1] + (t - s) * (1 - y[0]), y[2] + (t - s) * std::pow(y[0], p)};
}

}  // namespace

TEST_CASE("rk_flow on the example") {
  const auto f = builtin::example_fields(3);
  const auto u = builtin::example_control();
  const Eigen::VectorXd x = rk_flow(f, u, 0.0, Eigen::Vector3d(0.1, 0, 0), 1.0);
  CHECK((x - Eigen::Vector3d(0.1, 0.9, 0.001)).norm() < 1e-12);
  const Eigen::VectorXd back = rk_flow(f, u, 1.0, x, 0.0);
  CHECK((back - Eigen::Vector3d(0.1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("rk_flow respects control breakpoints") {
  // x' = u(t) with u = 1 then -1: exact piecewise-linear solution.
  const std::vector<PolyVectorField> f{PolyVectorField::parse({"1"}, 1)};
  const ControlSignal u = ControlSignal::parse({"pw[(0,0.3,1),(0.3,1,-1)]"});
  const Eigen::VectorXd x = rk_flow(f, u, 0.0, Eigen::VectorXd::Zero(1), 1.0, 0.07);
  CHECK(x[0] == doctest::Approx(0.3 - 0.7).epsilon(1e-13));
}

TEST_CASE("exact flow of the example") {
  const auto f = builtin::example_fields(3);
  const FlowMap flow = picard_flow(f, builtin::example_control(), 0.0, {.require_exact = true});
  REQUIRE(flow.backend() == FlowMap::Backend::exact);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ut(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector3d y = testgen::random_point(rng, 3);
    const double s = ut(rng);
    const double t = ut(rng);
    CHECK((flow.transport(y, s, t) - example_transport(y, s, t, 3)).norm() < 1e-13);
  }
  CHECK((flow(Eigen::Vector3d::Zero(), 1.0) - Eigen::Vector3d(0, 1, 0)).norm() < 1e-14);
}

TEST_CASE("pushforward and pullbacks of the example") {
  for (unsigned p : {2u, 3u, 4u}) {
    const auto f = builtin::example_fields(p);
    const FlowMap flow = picard_flow(f, builtin::example_control(), 0.0, {.require_exact = true});
    const PolyVectorField g1 = pullback_field(flow, 0);
    const PolyVectorField g2 = pullback_field(flow, 1);
    const std::string pm1 = std::to_string(p - 1);
    const PolyVectorField g1_expect =
        PolyVectorField::parse({"1", "t - 1", "-" + std::to_string(p) + "*(t - 1)*x1^" + pm1}, 3);
    CHECK(g1.pruned(1e-13) == g1_expect);
    CHECK(g2.pruned(1e-13) == f[1]);

    // Pullback consistency with the RK pushforward.
    const Eigen::Vector3d q1(0, 1, 0);
    for (double t : {0.0, 0.25, 0.6, 1.0}) {
      const Eigen::MatrixXd M = pushforward_matrix(flow, q1, t);
      const Eigen::VectorXd gam = flow(Eigen::Vector3d::Zero(), t);
      const auto [x1, J] = rk_variational(flow.drift(), t, gam, 1.0, 1e-3);
      CHECK((M - J).norm() < 1e-10);
      CHECK((g1.eval(q1, t) - J * f[0].eval(gam, t)).norm() < 1e-10);
    }
  }
}

TEST_CASE("adjoint curve of the example") {
  const auto f = builtin::example_fields(3);
  const FlowMap flow = picard_flow(f, builtin::example_control(), 0.0, {.require_exact = true});
  const AdjointCurve lam = adjoint_curve(flow, Eigen::Vector3d(0, 1, 0), Eigen::Vector3d(0, 0, 1));
  REQUIRE(lam.is_exact());
  for (double t : {0.0, 0.3, 0.9, 1.0}) CHECK((lam(t) - Eigen::Vector3d(0, 0, 1)).norm() < 1e-14);

  const FlowMap num = numeric_flow(f, builtin::example_control(), 0.0);
  const AdjointCurve nlam = adjoint_curve(num, Eigen::Vector3d(0, 1, 0), Eigen::Vector3d(0, 0, 1));
  CHECK_FALSE(nlam.is_exact());
  for (double t : {0.0, 0.3, 0.9, 1.0}) CHECK((nlam(t) - Eigen::Vector3d(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("symbolic pullback is rejected on the numeric backend") {
  const auto f = builtin::example_fields(3);
  const FlowMap num = numeric_flow(f, builtin::example_control(), 0.0);
  CHECK_THROWS_WITH_AS(pullback_field(num, 0), "symbolic pullback requested on the numeric flow backend",
                       ValidationError);
}

TEST_CASE("property: exact and numeric backends agree") {
  std::mt19937_64 rng(17);
  int exact_cases = 0;
  for (int trial = 0; trial < 12; ++trial) {
    // Nilpotent-ish random drifts: component k depends only on x_1..x_{k-1}.
    const std::size_t n = 3;
    std::vector<PolyVectorField> fields;
    for (int i = 0; i < 2; ++i) {
      std::vector<Polynomial> comps;
      for (std::size_t c = 0; c < n; ++c) {
        comps.push_back(c == 0 ? Polynomial::constant(n, 1.0 + i) : testgen::random_int_poly(rng, c, 2, 3, false));
        // Re-embed into n state variables.
        std::vector<Polynomial> subs;
        for (std::size_t j = 0; j < c; ++j) subs.push_back(Polynomial::variable(n, j));
        if (c > 0) comps.back() = comps.back().compose(subs, Polynomial::time(n));
      }
      fields.emplace_back(std::move(comps));
    }
    const ControlSignal u = ControlSignal::parse({"t", "1 - t"});
    const FlowMap ex = picard_flow(fields, u, 0.0);
    if (ex.backend() != FlowMap::Backend::exact) continue;
    ++exact_cases;
    const FlowMap num = numeric_flow(fields, u, 0.0, {.rk_step = 1e-3});
    const Eigen::VectorXd q = testgen::random_point(rng, n, 0.5);
    for (double t : {0.2, 0.7, 1.0}) {
      CHECK((ex.transport(q, 0.0, t) - num.transport(q, 0.0, t)).norm() < 1e-8);
      CHECK((ex.jacobian(q, 0.0, t) - num.jacobian(q, 0.0, t)).norm() < 1e-8);
    }
  }
  CHECK(exact_cases > 0);
}

TEST_CASE("property: group law P_s^t P_r^s = P_r^t") {
  const auto f = builtin::example_fields(2);
  const ControlSignal u = ControlSignal::parse({"cos(2*pi*t)", "1"});
  const FlowMap num = numeric_flow(f, u, 0.0);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ut(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd y = testgen::random_point(rng, 3);
    const double r = ut(rng);
    const double s = ut(rng);
    const double t = ut(rng);
    const Eigen::VectorXd lhs = num.transport(num.transport(y, r, s), s, t);
    CHECK((lhs - num.transport(y, r, t)).norm() < 1e-10);
  }
}
