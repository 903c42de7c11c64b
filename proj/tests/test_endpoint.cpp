#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "endpt/builtin.hpp"
#include "endpt/endpoint.hpp"
#include "endpt/errors.hpp"
#include "generators.hpp"

using namespace endpt;

namespace {

constexpr double pi = std::numbers::pi;

EndpointProblem example(unsigned p, EndpointOptions opts = {}) {
  return EndpointProblem(builtin::example_fields(p), builtin::example_control(), builtin::example_q0(), opts);
}

const Eigen::Vector3d e3(0, 0, 1);

ControlSignal golden_v() { return builtin::example_perturbation(); }

// Random element of ker(d0G) for the example: zero mean first channel, shifted second.
ControlSignal random_kernel_control(std::mt19937_64& rng) {
  QuasiTrigPoly v1 = testgen::random_qtp(rng, 2, 3, 4);
  v1 -= QuasiTrigPoly::constant(v1.integral(0, 1));
  QuasiTrigPoly v2 = testgen::random_qtp(rng, 2, 3, 3);
  const QuasiTrigPoly tm1 = QuasiTrigPoly::monomial(1) - QuasiTrigPoly::constant(1);
  v2 -= QuasiTrigPoly::constant((tm1 * v1 + v2).integral(0, 1));
  return ControlSignal(std::vector<QuasiTrigPoly>{v1, v2});
}

double gk(const auto& f) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 15, 1e-14);
}

}  // namespace

TEST_CASE("end-point problem of the example") {
  const EndpointProblem P = example(3);
  REQUIRE(P.exact());
  CHECK((P.q1() - Eigen::Vector3d(0, 1, 0)).norm() < 1e-14);
  const Eigen::VectorXd rk = rk_flow(P.fields(), P.u_ref(), 0.0, P.q0(), 1.0);
  CHECK((P.q1() - rk).norm() < 1e-10);
  CHECK(P.probes().size() == 34);
}

TEST_CASE("first_diff examples") {
  const EndpointProblem P = example(3);
  CHECK(first_diff(P, golden_v()).norm() < 1e-14);
  CHECK(first_diff(P, ControlSignal::zero(2)).norm() == 0.0);

  // General v: (int v1, int (t-1) v1 + v2, 0), oracle by quadrature.
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10; ++i) {
    const auto v1 = testgen::random_qtp(rng, 2, 3);
    const auto v2 = testgen::random_qtp(rng, 2, 3);
    const ControlSignal v(std::vector<QuasiTrigPoly>{v1, v2});
    const Eigen::Vector3d expect(gk([&](double t) { return v1(t); }),
                                 gk([&](double t) { return (t - 1) * v1(t) + v2(t); }), 0.0);
    CHECK((first_diff(P, v) - expect).norm() < 1e-12);
  }

  const ControlSignal pw = ControlSignal::parse({"pw[(0,0.5,1),(0.5,1,-1)]", "0"});
  CHECK((first_diff(P, pw) - Eigen::Vector3d(0, -0.25, 0)).norm() < 1e-12);
}

TEST_CASE("first_diff on the numeric backend") {
  EndpointOptions opts;
  opts.flow.picard_max_iter = 0;  // forces the numeric fallback
  const EndpointProblem N = example(3, opts);
  REQUIRE_FALSE(N.exact());
  const EndpointProblem P = example(3);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 3; ++i) {
    const ControlSignal v(std::vector<QuasiTrigPoly>{testgen::random_qtp(rng, 2, 3), testgen::random_qtp(rng, 2, 3)});
    CHECK((first_diff(N, v) - first_diff(P, v)).norm() < 1e-9);
  }
  CHECK(N.cokernel().corank() == 1);
  CHECK((N.cokernel().lambdas[0] - e3).norm() < 1e-9);
  CHECK_THROWS_AS(hessian_scalar(N, e3, golden_v(), golden_v()), ValidationError);
}

TEST_CASE("cokernel examples") {
  for (unsigned p : {2u, 3u, 4u}) {
    const EndpointProblem P = example(p);
    REQUIRE(P.cokernel().corank() == 1);
    CHECK((P.cokernel().lambdas[0] - e3).norm() < 1e-12);
  }

  // Heisenberg-type fields; oracle: three independent RK-pushforward image vectors.
  const std::vector<PolyVectorField> heis{PolyVectorField::parse({"1", "0", "0"}, 3),
                                          PolyVectorField::parse({"0", "1", "x1"}, 3)};
  const ControlSignal u = ControlSignal::parse({"1", "t"});
  const EndpointProblem H(heis, u, Eigen::Vector3d::Zero());
  CHECK(H.cokernel().corank() == 0);
  const ControlledDrift drift(heis, u);
  Eigen::Matrix3d W;
  int col = 0;
  for (auto [t, i] : {std::pair{0.0, 0}, std::pair{0.0, 1}, std::pair{1.0, 1}}) {
    const Eigen::VectorXd gam = rk_flow(drift, 0.0, Eigen::Vector3d::Zero(), t, 1e-3);
    const auto [x1, J] = rk_variational(drift, t, gam, 1.0, 1e-3);
    W.col(col++) = J * heis[static_cast<std::size_t>(i)].eval(gam, t);
  }
  CHECK(std::abs(W.determinant()) > 0.1);

  std::vector<PolyVectorField> coords;
  for (std::size_t i = 0; i < 3; ++i) coords.push_back(PolyVectorField::coordinate(3, i));
  const EndpointProblem C(coords, ControlSignal::parse({"0", "t", "1"}), Eigen::Vector3d::Zero());
  CHECK(C.cokernel().corank() == 0);
}

TEST_CASE("hessian_scalar examples") {
  const EndpointProblem P3 = example(3);
  std::mt19937_64 rng(10);
  for (int i = 0; i < 10; ++i) {
    const ControlSignal v = random_kernel_control(rng);
    CHECK(std::abs(hessian_scalar(P3, e3, v, v)) <= 1e-10);
  }
  CHECK(hessian_scalar(P3, e3, ControlSignal::zero(2), golden_v()) == 0.0);

  // p = 2: exact value 3 from the symbolic oracle (tests/oracles/endpoint_oracle.py).
  const EndpointProblem P2 = example(2);
  const double h = hessian_scalar(P2, e3, golden_v(), golden_v());
  CHECK(std::abs(h - 3.0) < 1e-9);
  CHECK(std::abs(hessian_scalar(P2, e3, golden_v(), golden_v(), IntegrationPath::quadrature) - 3.0) < 1e-9);
  const ControlSignal v2 = ControlSignal::parse({"4*pi*sin(4*pi*t)", "1"});
  CHECK(std::abs(hessian_scalar(P2, e3, v2, v2) - 3.0) < 1e-9);

  CHECK_THROWS_AS(hessian_scalar(P3, e3, ControlSignal::parse({"1", "0"}), golden_v()), ValidationError);
}

TEST_CASE("third_scalar examples") {
  const EndpointProblem P3 = example(3);
  CHECK(std::abs(third_scalar(P3, e3, golden_v()) - 15.0) < 1e-9);
  CHECK(std::abs(third_scalar(P3, e3, golden_v(), IntegrationPath::quadrature) - 15.0) < 1e-6);
  CHECK(third_scalar(P3, e3, ControlSignal::zero(2)) == 0.0);

  // p = 2: the golden perturbation leaves the domain; the bare integral is 9 (symbolic oracle).
  const EndpointProblem P2 = example(2);
  CHECK_THROWS_AS(third_scalar(P2, e3, golden_v()), ValidationError);
  CHECK(std::abs(third_scalar(P2, e3, golden_v(), IntegrationPath::automatic, false) - 9.0) < 1e-9);
  // The pure g1 triple bracket does vanish for p = 2.
  CHECK(P2.brackets().third[0][0][0][2].is_zero());
}

TEST_CASE("trilinear examples") {
  const EndpointProblem P = example(3);
  const ControlSignal v = golden_v();
  CHECK(std::abs(trilinear(P, e3, v, v, v) - third_scalar(P, e3, v)) < 1e-12);
  CHECK(trilinear(P, e3, v, ControlSignal::zero(2), v) == 0.0);
  // Third argument off the kernel, so membership checks are skipped; symbolic oracle value 15/4.
  const ControlSignal w = ControlSignal::parse({"2*pi*sin(4*pi*t)", "0"});
  const double T = trilinear(P, e3, v, v, w, IntegrationPath::automatic, false);
  CHECK(std::abs(T - 3.75) < 1e-9);
  CHECK(std::abs(trilinear(P, e3, v, v, w, IntegrationPath::quadrature, false) - 3.75) < 1e-9);
}

TEST_CASE("dom3_membership examples") {
  const EndpointProblem P3 = example(3);
  std::mt19937_64 rng(21);
  for (int i = 0; i < 3; ++i) CHECK(dom3_membership(P3, random_kernel_control(rng)));
  CHECK(dom3_membership(P3, golden_v()));
  CHECK_FALSE(dom3_membership(P3, ControlSignal::parse({"1", "0"})));

  const EndpointProblem P2 = example(2);
  CHECK_FALSE(dom3_membership(P2, golden_v()));
  const auto r = dom3_residuals(P2, P2.cokernel().lambdas, golden_v(), P2.probes());
  CHECK(r.first_diff_norm < 1e-12);
  CHECK(r.max_pairing > 0.1);
}

TEST_CASE("simplex_integrate examples") {
  const auto one = [](std::span<const double>) { return 1.0; };
  CHECK(std::abs(simplex_integrate(one, 3).value - 1.0 / 6.0) < 1e-14);
  CHECK(std::abs(simplex_integrate(one, 2).value - 0.5) < 1e-14);
  CHECK(std::abs(simplex_integrate(one, 1).value - 1.0) < 1e-14);
  const auto v1 = [](double t) { return 2 * pi * std::sin(2 * pi * t); };
  const auto f = [&](std::span<const double> s) { return 6 * v1(s[0]) * v1(s[1]) * v1(s[2]) * (s[1] - s[2]); };
  CHECK(std::abs(2 * simplex_integrate(f, 3).value - 15.0) < 1e-8);
  CHECK_THROWS_AS(simplex_integrate(one, 4), ValidationError);
}

TEST_CASE("property: closed form agrees with quadrature") {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> dd(1, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = dd(rng);
    const auto nd = static_cast<std::size_t>(d);
    const Polynomial kernel = testgen::random_int_poly(rng, nd, 3, 4, false);
    std::vector<QuasiTrigPoly> sig;
    for (int r = 0; r < d; ++r) sig.push_back(testgen::random_qtp(rng, 2, 3, 3));
    const double closed = simplex_closed_form(kernel, sig);
    const auto f = [&](std::span<const double> s) {
      double w = kernel.eval(s, 0.0);
      for (std::size_t r = 0; r < nd; ++r) w *= sig[r](s[r]);
      return w;
    };
    CHECK(std::abs(closed - simplex_integrate(f, d).value) <= 1e-9 * std::max(1.0, std::abs(closed)));
  }
}

TEST_CASE("property: representation equivalence on domain controls") {
  const EndpointProblem P = example(3);
  std::mt19937_64 rng(55);
  for (int i = 0; i < 5; ++i) {
    const ControlSignal v = random_kernel_control(rng);
    REQUIRE(dom3_membership(P, v));
    const double fwd = third_integral(P, e3, v, Nesting::forward);
    const double rev = third_integral(P, e3, v, Nesting::reversed);
    CHECK(std::abs(fwd - rev) <= 1e-8);
  }
}

TEST_CASE("property: trilinear permutation symmetry") {
  const EndpointProblem P = example(3);
  std::mt19937_64 rng(66);
  for (int i = 0; i < 5; ++i) {
    const ControlSignal a = random_kernel_control(rng);
    const ControlSignal b = random_kernel_control(rng);
    const ControlSignal c = random_kernel_control(rng);
    const double ref = trilinear(P, e3, a, b, c, IntegrationPath::automatic, false);
    for (const auto& [x, y, z] : {std::tuple{&a, &c, &b}, std::tuple{&b, &a, &c}, std::tuple{&b, &c, &a},
                                  std::tuple{&c, &a, &b}, std::tuple{&c, &b, &a}}) {
      CHECK(std::abs(trilinear(P, e3, *x, *y, *z, IntegrationPath::automatic, false) - ref) <= 1e-10);
    }
  }
}

TEST_CASE("property: third_scalar is unchanged by an affine change of coordinates") {
  // x' = A x + b with A unimodular, so the transformed fields stay integral.
  Eigen::Matrix3d A;
  A << 1, 1, 0, 0, 1, 1, 0, 0, 1;
  const Eigen::Matrix3d Ainv = A.inverse();
  const Eigen::Vector3d b(0.5, -1, 2);
  const std::size_t n = 3;
  std::vector<Polynomial> back;  // x = A^{-1} (x' - b)
  for (std::size_t r = 0; r < n; ++r) {
    Polynomial s = Polynomial::constant(n, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
      const auto ri = static_cast<Eigen::Index>(r);
      const auto ci = static_cast<Eigen::Index>(c);
      s += Ainv(ri, ci) * (Polynomial::variable(n, c) - Polynomial::constant(n, b[ci]));
    }
    back.push_back(s);
  }
  std::vector<PolyVectorField> fields;
  for (const auto& f : builtin::example_fields(3)) {
    const PolyVectorField pulled = f.compose(back, Polynomial::time(n));
    std::vector<Polynomial> comps;
    for (std::size_t r = 0; r < n; ++r) {
      Polynomial s(n);
      for (std::size_t c = 0; c < n; ++c) s += A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * pulled[c];
      comps.push_back(s);
    }
    fields.emplace_back(std::move(comps));
  }
  const Eigen::Vector3d q0 = b;  // image of the origin
  const EndpointProblem Q(fields, builtin::example_control(), q0);
  REQUIRE(Q.exact());
  const Eigen::Vector3d lam = Ainv.transpose() * e3;
  const EndpointProblem P = example(3);
  std::mt19937_64 rng(77);
  for (int i = 0; i < 3; ++i) {
    const ControlSignal v = random_kernel_control(rng);
    CHECK(std::abs(third_scalar(Q, lam, v) - third_scalar(P, e3, v)) <= 1e-8);
  }
}
