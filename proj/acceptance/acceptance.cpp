// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>

#include "endpt/builtin.hpp"
#include "endpt/conditions.hpp"
#include "endpt/cubic.hpp"
#include "endpt/endpoint.hpp"
#include "endpt/openness.hpp"
#include "endpt/report.hpp"
#include "generators.hpp"

using namespace endpt;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

EndpointProblem example(int p) {
  return EndpointProblem(builtin::example_fields(p), builtin::example_control(), builtin::example_q0());
}

const Eigen::Vector3d e3(0, 0, 1);

ControlSignal random_kernel_control(std::mt19937_64& rng) {
  QuasiTrigPoly v1 = testgen::random_qtp(rng, 2, 3, 4);
  v1 -= QuasiTrigPoly::constant(v1.integral(0, 1));
  QuasiTrigPoly v2 = testgen::random_qtp(rng, 2, 3, 3);
  const QuasiTrigPoly tm1 = QuasiTrigPoly::monomial(1) - QuasiTrigPoly::constant(1);
  v2 -= QuasiTrigPoly::constant((tm1 * v1 + v2).integral(0, 1));
  return ControlSignal(std::vector<QuasiTrigPoly>{v1, v2});
}

SymmetricTrilinear cubic(const std::vector<std::string>& comps, std::size_t N) {
  std::vector<Polynomial> p;
  for (const auto& c : comps) p.push_back(Polynomial::parse(c, N));
  return SymmetricTrilinear::from_cubic(p);
}

void golden_value(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const EndpointProblem P = example(3);
  const ControlSignal v = builtin::example_perturbation();
  const double closed = third_scalar(P, e3, v, IntegrationPath::closed_form);
  const double quad = third_scalar(P, e3, v, IntegrationPath::quadrature);
  const double dt = seconds_since(t0);
  o.require(std::abs(closed - 15.0) <= 1e-9, "closed form within 1e-9");
  o.require(std::abs(quad - 15.0) <= 1e-6, "quadrature within 1e-6");
  o.require(dt < 5.0, "runtime under 5 s");
  o.detail.precision(15);
  o.detail << "closed=" << closed << " quadrature=" << quad << " time=" << dt << "s";
}

void corank_and_hessian(Outcome& o) {
  for (int p : {2, 3, 4, 5}) {
    const EndpointProblem P = example(p);
    const auto& L = P.cokernel().lambdas;
    const std::string tag = "p=" + std::to_string(p);
    o.require(L.size() == 1, tag + " corank 1");
    if (L.size() == 1) o.require((L[0].cwiseAbs() - e3).norm() <= 1e-12, tag + " generator (0,0,+-1)");
    o.require(singularity_classify(P).kind == Singularity::strictly_singular, tag + " strictly singular");
  }
  const EndpointProblem P = example(3);
  std::mt19937_64 rng(2);
  double worst = 0;
  for (int i = 0; i < 10; ++i) worst = std::max(worst, std::abs(hessian_scalar(P, e3, random_kernel_control(rng), random_kernel_control(rng))));
  // Also on the diagonal.
  for (int i = 0; i < 10; ++i) {
    const ControlSignal v = random_kernel_control(rng);
    worst = std::max(worst, std::abs(hessian_scalar(P, e3, v, v)));
  }
  o.require(worst <= 1e-10, "hessian vanishes on kernel controls");
  o.detail << "p=2..5 corank 1, strictly singular; max |hessian| on kernel=" << worst;
}

void pullbacks_and_bracket(Outcome& o) {
  const EndpointProblem P = example(3);
  const auto& g = P.pullbacks();
  const PolyVectorField g1 = PolyVectorField::parse({"1", "t - 1", "-3*(t - 1)*x1^2"}, 3);
  const PolyVectorField g2 = PolyVectorField::parse({"0", "1 - x1", "x1^3"}, 3);
  o.require(g.size() == 2 && g[0].pruned(1e-13) == g1, "g1 term-for-term");
  o.require(g.size() == 2 && g[1].pruned(1e-13) == g2, "g2 term-for-term");
  // Slots (s1, s2, s3) = (t3, t2, t1); outer field at t1.
  const Polynomial b = P.brackets().third[0][0][0][2];
  const Polynomial expect = Polynomial::parse("6*x2 - 6*x1", 3);
  o.require((b - expect).is_zero(), "triple bracket minus 6(t2 - t3) is zero");
  o.detail << "g1=" << g[0].pruned(1e-13).to_strings()[2] << " bracket=" << b.to_string();
}

void condition_suite(Outcome& o) {
  const EndpointProblem P3 = example(3);
  const auto grid = uniform_grid(101);
  const AdjointCurve l3 = normalized_adjoint(P3, e3);
  for (const auto& v : {pmp_check(P3, l3, grid), goh_check(P3, l3, grid), third_order_condition(P3, l3, grid)}) {
    o.require(v.holds && v.max_violation == 0.0 && v.symbolic, v.name + " holds symbolically with violation 0");
  }
  const EndpointProblem P1 = example(1);
  const ConditionVerdict g1 = goh_check(P1, normalized_adjoint(P1, e3), grid);
  o.require(!g1.holds, "Goh fails on example-1");
  o.detail << "example-3 pmp/goh/third hold (0); example-1 goh violation=" << g1.max_violation;
}

void representation_equivalence(Outcome& o) {
  const EndpointProblem P = example(3);
  std::mt19937_64 rng(55);
  double worst = 0;
  for (int i = 0; i < 5; ++i) {
    const ControlSignal v = random_kernel_control(rng);
    o.require(dom3_membership(P, v), "random control in the domain");
    worst = std::max(worst, std::abs(third_integral(P, e3, v, Nesting::forward) -
                                     third_integral(P, e3, v, Nesting::reversed)));
  }
  o.require(worst <= 1e-8, "two representations agree to 1e-8");
  o.detail << "max discrepancy=" << worst;
}

void openness(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const EndpointProblem P = example(3);
  OpennessOptions opts;
  opts.family.epsilon = 0.3;
  opts.cover.delta = 1e-3;
  opts.cover.samples = 125;
  opts.cover.tol = 1e-6;
  const auto v = openness_corank1(P, e3, builtin::example_perturbation(), opts);
  const double dt = seconds_since(t0);
  o.require(v.coverage.has_value() && v.coverage->targets.size() == 125, "125 targets");
  o.require(v.coverage.has_value() && v.coverage->fraction == 1.0, "coverage fraction 1.0");
  o.require(v.expansion.has_value() && v.expansion->slope >= 9.5, "slope >= 9.5");
  o.require(dt < 60.0, "runtime under 60 s");
  if (v.coverage) o.detail << "coverage=" << v.coverage->fraction;
  if (v.expansion) o.detail << " slope=" << v.expansion->slope;
  o.detail << " time=" << dt << "s";
}

void cubic_module(Outcome& o) {
  const auto H = cubic({"x1^3 - 3*x1*x2^2"}, 2);
  const auto z = regular_zero_search(H);
  o.require(z.has_value(), "regular zero of x^3 - 3xy^2");
  if (z) {
    const auto j = cubic_eval_and_diff(H, z->v);
    o.require(j.value.norm() <= 1e-10, "|P| <= 1e-10");
    o.require(Eigen::JacobiSVD<Eigen::MatrixXd>(j.jacobian).singularValues().minCoeff() >= 1e-6, "sigma_min >= 1e-6");
    o.detail << "zero=(" << z->v(0) << "," << z->v(1) << ") sigma=" << z->sigma_min;
  }
  SearchOptions so;
  so.attempts = 100;
  o.require(!regular_zero_search(cubic({"x1^3"}, 1), so).has_value(), "x^3 has none in 100 attempts");
  const std::vector<Eigen::MatrixXd> pair{Eigen::Matrix2d{{1, 0}, {0, -1}}, Eigen::Matrix2d{{0, 1}, {1, 0}}};
  o.require(!common_isotropic_test(pair, so).has_value(), "(x^2 - y^2, 2xy) has no common isotropic vector");
}

void property_suites(Outcome& o) {
  std::mt19937_64 rng(2024);
  int jac_fail = 0;
  std::uniform_int_distribution<std::size_t> dimd(1, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = dimd(rng);
    const auto X = testgen::random_int_field(rng, n, 3, 3);
    const auto Y = testgen::random_int_field(rng, n, 3, 3);
    const auto Z = testgen::random_int_field(rng, n, 3, 3);
    const bool anti = (lie_bracket(X, Y) + lie_bracket(Y, X)).is_zero();
    const bool jac =
        (lie_bracket(X, lie_bracket(Y, Z)) + lie_bracket(Y, lie_bracket(Z, X)) + lie_bracket(Z, lie_bracket(X, Y)))
            .is_zero();
    jac_fail += (anti && jac) ? 0 : 1;
  }
  o.require(jac_fail == 0, "Jacobi/antisymmetry exact on 50 fields");

  const EndpointProblem P = example(3);
  double sym = 0;
  for (int i = 0; i < 5; ++i) {
    const ControlSignal a = random_kernel_control(rng), b = random_kernel_control(rng), c = random_kernel_control(rng);
    const double ref = trilinear(P, e3, a, b, c, IntegrationPath::automatic, false);
    for (const auto& [x, y, z] : {std::tuple{&a, &c, &b}, std::tuple{&b, &a, &c}, std::tuple{&b, &c, &a},
                                  std::tuple{&c, &a, &b}, std::tuple{&c, &b, &a}})
      sym = std::max(sym, std::abs(trilinear(P, e3, *x, *y, *z, IntegrationPath::automatic, false) - ref));
  }
  o.require(sym <= 1e-10, "trilinear permutation symmetry");

  double cq = 0;
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
    cq = std::max(cq, std::abs(closed - simplex_integrate(f, d).value) / std::max(1.0, std::abs(closed)));
  }
  o.require(cq <= 1e-9, "closed form vs quadrature on 20 integrands");

  const auto fields = builtin::example_fields(3);
  const FlowMap ex = picard_flow(fields, builtin::example_control(), 0.0, {.require_exact = true});
  const FlowMap num = numeric_flow(fields, builtin::example_control(), 0.0, {.rk_step = 1e-3});
  double flow = 0;
  for (int i = 0; i < 5; ++i) {
    const Eigen::VectorXd q = testgen::random_point(rng, 3, 0.5);
    for (double t : {0.3, 0.7, 1.0}) {
      flow = std::max(flow, (ex.transport(q, 0.0, t) - num.transport(q, 0.0, t)).norm());
      flow = std::max(flow, (ex.jacobian(q, 0.0, t) - num.jacobian(q, 0.0, t)).norm());
    }
  }
  o.require(flow <= 1e-8, "exact vs numeric flow on example-3");

  double fd = 0;
  for (int i = 0; i < 10; ++i) {
    const auto X = testgen::random_int_field(rng, 3, 3, 4);
    const auto Y = testgen::random_int_field(rng, 3, 3, 4);
    const Eigen::VectorXd q = testgen::random_point(rng, 3);
    const Eigen::VectorXd ref = testgen::fd_bracket(X, Y, q, 0.0);
    fd = std::max(fd, (lie_bracket(X, Y).eval(q, 0.0) - ref).norm() / std::max(1.0, ref.norm()));
  }
  const auto T = cubic({"x1^3 - 3*x1*x2^2 + x2*x3^2", "x1*x2*x3 - x3^3"}, 3);
  for (int i = 0; i < 10; ++i) {
    const Eigen::VectorXd v = testgen::random_point(rng, 3);
    const auto j = cubic_eval_and_diff(T, v);
    const double h = 1e-5;
    for (Eigen::Index k = 0; k < 3; ++k) {
      const Eigen::VectorXd e = Eigen::VectorXd::Unit(3, k) * h;
      const Eigen::VectorXd g = (T.apply(v + e, v + e, v + e) - T.apply(v - e, v - e, v - e)) / (2 * h);
      fd = std::max(fd, (g - j.jacobian.col(k)).norm());
    }
  }
  o.require(fd <= 1e-6, "finite-difference gradients");
  o.detail << "jacobi failures=" << jac_fail << " sym=" << sym << " closed/quad=" << cq << " flow=" << flow
           << " fd=" << fd;
}

void determinism(Outcome& o) {
  RunFlags f;
  f.seed = 11;
  const SystemSpec s = parse_system_spec("builtin:example-3");
  const auto a = run_report(s, f);
  const auto b = run_report(s, f);
  const std::string da = without_timestamp(a.body).dump(2);
  const std::string db = without_timestamp(b.body).dump(2);
  o.require(da == db, "identical reports modulo timestamp");
  o.require(a.body.contains("generated_at"), "timestamp present");
  o.detail << da.size() << " bytes identical";
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
      {"golden third_scalar = 15 on example-3", golden_value},
      {"corank, cokernel generator, hessian and class for p >= 2", corank_and_hessian},
      {"symbolic pullbacks and triple bracket of example-3", pullbacks_and_bracket},
      {"condition suite on example-3 and example-1", condition_suite},
      {"representation equivalence on domain controls", representation_equivalence},
      {"openness ball cover and expansion slope", openness},
      {"cubic regular zeros and isotropy", cubic_module},
      {"property suites", property_suites},
      {"report determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << i + 1 << " " << criteria[i].first << ": " << o.detail.str()
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
