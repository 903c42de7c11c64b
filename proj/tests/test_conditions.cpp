#include <doctest.h>

#include <random>

#include "endpt/builtin.hpp"
#include "endpt/conditions.hpp"
#include "endpt/errors.hpp"
#include "generators.hpp"

using namespace endpt;

namespace {

EndpointProblem example(unsigned p, EndpointOptions opts = {}) {
  return EndpointProblem(builtin::example_fields(p), builtin::example_control(), builtin::example_q0(), opts);
}

AdjointCurve constant_curve(const Eigen::VectorXd& l) {
  std::vector<Polynomial> c;
  for (Eigen::Index i = 0; i < l.size(); ++i) c.push_back(Polynomial::constant(0, l[i]));
  return AdjointCurve(std::move(c));
}

const std::vector<double> grid = uniform_grid(101);
const Eigen::Vector3d e3(0, 0, 1);

}  // namespace

TEST_CASE("pmp_check examples") {
  for (unsigned p : {2u, 3u, 4u}) {
    const EndpointProblem P = example(p);
    const ConditionVerdict v = pmp_check(P, normalized_adjoint(P, e3), grid);
    CHECK(v.holds);
    CHECK(v.symbolic);
    CHECK(v.max_violation == 0.0);
    CHECK_FALSE(v.witness.has_value());
  }
  const EndpointProblem P = example(3);
  const ConditionVerdict bad = pmp_check(P, constant_curve(Eigen::Vector3d(0, 1, 0)), grid);
  CHECK_FALSE(bad.holds);
  CHECK(bad.max_violation == doctest::Approx(1.0));
  REQUIRE(bad.witness.has_value());
  CHECK(bad.witness->indices == std::vector<std::size_t>{1});

  const std::vector<PolyVectorField> zero{PolyVectorField::zero(3), PolyVectorField::zero(3)};
  const EndpointProblem Z(zero, builtin::example_control(), Eigen::Vector3d::Zero());
  CHECK(pmp_check(Z, constant_curve(e3), grid).holds);
}

TEST_CASE("goh_check examples") {
  const EndpointProblem P3 = example(3);
  const auto g3 = goh_check(P3, normalized_adjoint(P3, e3), grid);
  CHECK(g3.holds);
  CHECK(g3.max_violation == 0.0);
  const EndpointProblem P2 = example(2);
  CHECK(goh_check(P2, normalized_adjoint(P2, e3), grid).max_violation == 0.0);
  // p = 1: <lambda, [f1, f2]> = 1 along the curve.
  const EndpointProblem P1 = example(1);
  const auto g1 = goh_check(P1, normalized_adjoint(P1, e3), grid);
  CHECK_FALSE(g1.holds);
  CHECK(g1.symbolic);
  CHECK(g1.max_violation == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(goh_check(P1, constant_curve(e3), grid).max_violation == doctest::Approx(1.0));
}

TEST_CASE("third_order_condition examples") {
  const EndpointProblem P = example(3);
  const auto f = P.fields();
  // [f1,[f1,f2]] = 6 x1 d3 for p = 3.
  CHECK(lie_bracket(f[0], lie_bracket(f[0], f[1])) == PolyVectorField::parse({"0", "0", "6*x1"}, 3));
  const auto v = third_order_condition(P, normalized_adjoint(P, e3), grid);
  CHECK(v.holds);
  CHECK(v.symbolic);
  CHECK(v.max_violation == 0.0);
  CHECK(v.notes.empty());
}

TEST_CASE("condition suite on the example surfaces both facts") {
  const EndpointProblem P = example(3);
  const AdjointCurve lam = normalized_adjoint(P, P.cokernel().lambdas.at(0));
  for (const auto& v : {pmp_check(P, lam, grid), goh_check(P, lam, grid), third_order_condition(P, lam, grid)}) {
    CHECK(v.holds);
    CHECK(v.max_violation == 0.0);
  }
  CHECK(std::abs(third_scalar(P, P.cokernel().lambdas[0], builtin::example_perturbation()) - 15.0) < 1e-9);
}

TEST_CASE("conditions on the numeric backend") {
  EndpointOptions opts;
  opts.flow.picard_max_iter = 0;
  const EndpointProblem N = example(3, opts);
  const AdjointCurve lam = normalized_adjoint(N, e3);
  CHECK_FALSE(lam.is_exact());
  const auto v = pmp_check(N, lam, grid);
  CHECK_FALSE(v.symbolic);
  CHECK(v.holds);
  CHECK(v.max_violation < 1e-10);
  CHECK_FALSE(goh_check(example(1, opts), normalized_adjoint(example(1, opts), e3), grid).holds);
}

TEST_CASE("singularity_classify examples") {
  for (unsigned p : {2u, 3u}) {
    const auto r = singularity_classify(example(p));
    CHECK(r.kind == Singularity::strictly_singular);
    CHECK(r.extended_corank == 1);
  }
  const std::vector<PolyVectorField> heis{PolyVectorField::parse({"1", "0", "0"}, 3),
                                          PolyVectorField::parse({"0", "1", "x1"}, 3)};
  const EndpointProblem H(heis, ControlSignal::parse({"1", "t"}), Eigen::Vector3d::Zero());
  const auto rh = singularity_classify(H);
  CHECK(rh.kind == Singularity::regular);
  CHECK_FALSE(rh.critical);

  // d0G onto, dJ = first coordinate of d0G: the only annihilator is normal.
  const std::vector<PolyVectorField> plane{PolyVectorField::coordinate(2, 0), PolyVectorField::coordinate(2, 1)};
  const EndpointProblem N(plane, ControlSignal::parse({"1", "0"}), Eigen::Vector2d::Zero());
  const auto rn = singularity_classify(N);
  CHECK(rn.kind == Singularity::regular);
  CHECK(rn.critical);
  CHECK(rn.has_normal);
  CHECK_FALSE(rn.has_abnormal);
  REQUIRE(rn.annihilators.size() == 1);
  // Oracle: (lambda, lambda0) proportional to (1, 0, -1).
  CHECK(std::abs(std::abs(rn.annihilators[0].dot(Eigen::Vector3d(1, 0, -1).normalized())) - 1.0) < 1e-10);

  // Both kinds: one field in the plane, u = (1).
  const EndpointProblem S({PolyVectorField::coordinate(2, 0)}, ControlSignal::parse({"1"}), Eigen::Vector2d::Zero());
  CHECK(singularity_classify(S).kind == Singularity::singular);

  const EndpointProblem V(builtin::example_fields(3), ControlSignal::parse({"0", "0"}), Eigen::Vector3d::Zero());
  CHECK_THROWS_AS(singularity_classify(V), ValidationError);
}

TEST_CASE("calibration_inequality examples") {
  const double tau = 0.5;
  SampledCurve gamma;
  for (int i = 0; i <= 1000; ++i) {
    gamma.times.push_back(tau * i / 1000.0);
    gamma.controls.emplace_back(0.0, 1.0);
  }
  const auto eq = calibration_evaluate(2, gamma);
  CHECK(eq.verdict.holds);
  CHECK(std::abs(eq.slack) < 1e-14);

  int strict = 0;
  int found = 0;
  for (std::uint64_t seed = 0; found < 100 && seed < 1000; ++seed) {
    const auto c = random_admissible_curve(2, tau, seed);
    if (!c) continue;
    ++found;
    const auto r = calibration_evaluate(2, *c);
    CHECK(r.verdict.holds);
    strict += r.slack > 1e-6 ? 1 : 0;
  }
  CHECK(found == 100);
  CHECK(strict == 100);

  SampledCurve longer = gamma;
  for (auto& t : longer.times) t *= 2.0;  // tau = 1 > 2/3
  const auto w = calibration_inequality(2, longer);
  CHECK(w.holds);
  CHECK(w.notes.size() == 2);

  SampledCurve off = gamma;
  off.controls[10] = Eigen::Vector2d(0.6, 0.6);
  CHECK_THROWS_AS(calibration_inequality(2, off), ValidationError);
  CHECK_THROWS_AS(calibration_inequality(3, gamma), ValidationError);
}

TEST_CASE("property: third-order expression is symmetric in (i, l)") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<PolyVectorField> f;
    for (int i = 0; i < 3; ++i) f.push_back(testgen::random_int_field(rng, 3, 2, 3));
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        for (std::size_t l = 0; l < 3; ++l) {
          const auto a = lie_bracket(f[i], lie_bracket(f[j], f[l])) + lie_bracket(f[l], lie_bracket(f[j], f[i]));
          const auto b = lie_bracket(f[l], lie_bracket(f[j], f[i])) + lie_bracket(f[i], lie_bracket(f[j], f[l]));
          CHECK(a == b);
        }
      }
    }
  }
}

TEST_CASE("property: verdicts are invariant under rescaling lambda") {
  for (unsigned p : {1u, 3u}) {
    const EndpointProblem P = example(p);
    const AdjointCurve lam = adjoint_curve(P.flow(), P.q1(), e3);
    for (double c : {-3.0, 0.25, 7.0}) {
      const auto a = goh_check(P, lam, grid);
      const auto b = goh_check(P, lam.scaled(c), grid);
      CHECK(a.holds == b.holds);
      CHECK(a.max_violation == doctest::Approx(b.max_violation).epsilon(1e-12));
      CHECK(third_order_condition(P, lam, grid).holds == third_order_condition(P, lam.scaled(c), grid).holds);
    }
  }
}
