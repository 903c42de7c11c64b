#include "endpt/conditions.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "endpt/errors.hpp"

namespace endpt {

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 31>;

struct Expression {
  std::vector<std::size_t> indices;
  PolyVectorField field;
};

double unit_scale(const AdjointCurve& lambda) {
  const double nrm = lambda(1.0).norm();
  if (!(nrm > 0.0)) throw ValidationError("adjoint curve vanishes at t = 1");
  return 1.0 / nrm;
}

ConditionVerdict scan(std::string name, const EndpointProblem& P, const AdjointCurve& lambda_in,
                      std::span<const double> grid, double tol, const std::vector<Expression>& exprs) {
  if (grid.empty()) throw ValidationError(name + ": empty time grid");
  const AdjointCurve lambda = lambda_in.scaled(unit_scale(lambda_in));
  ConditionVerdict v;
  v.name = std::move(name);
  v.tolerance = tol;
  v.symbolic = P.exact() && lambda.is_exact();
  auto record = [&](double value, double t, const std::vector<std::size_t>& ix) {
    if (!v.witness || value > v.max_violation) {
      v.max_violation = value;
      v.witness = Witness{t, ix};
    }
  };
  if (v.symbolic) {
    const std::vector<Polynomial> gamma = at_point(P.flow().map_from(P.flow().base_time()), P.q0());
    const auto& lam = lambda.polynomials();
    for (const auto& e : exprs) {
      Polynomial pairing(0);
      for (std::size_t r = 0; r < P.dim(); ++r) {
        if (e.field[r].is_zero() || lam[r].is_zero()) continue;
        pairing += lam[r] * e.field[r].compose(gamma, Polynomial::time(0));
      }
      pairing = pairing.pruned(1e-14);
      if (pairing.is_zero()) continue;  // identically zero along the curve
      for (double t : grid) record(std::abs(pairing.eval({}, t)), t, e.indices);
    }
  } else {
    for (double t : grid) {
      const Eigen::VectorXd x = P.gamma(t);
      const Eigen::VectorXd l = lambda(t);
      for (const auto& e : exprs) record(std::abs(l.dot(e.field.eval(x, t))), t, e.indices);
    }
  }
  if (v.max_violation == 0.0) v.witness.reset();
  v.holds = v.max_violation <= tol;
  return v;
}

}  // namespace

AdjointCurve normalized_adjoint(const EndpointProblem& P, const Eigen::VectorXd& lambda1) {
  const AdjointCurve c = adjoint_curve(P.flow(), P.q1(), lambda1);
  return c.scaled(unit_scale(c));
}

ConditionVerdict pmp_check(const EndpointProblem& P, const AdjointCurve& lambda, std::span<const double> grid,
                           double tol) {
  std::vector<Expression> ex;
  for (std::size_t j = 0; j < P.k(); ++j) ex.push_back({{j}, P.fields()[j]});
  return scan("pmp", P, lambda, grid, tol, ex);
}

ConditionVerdict goh_check(const EndpointProblem& P, const AdjointCurve& lambda, std::span<const double> grid,
                           double tol) {
  std::vector<Expression> ex;
  const auto& f = P.fields();
  for (std::size_t i = 0; i < P.k(); ++i) {
    for (std::size_t j = i + 1; j < P.k(); ++j) ex.push_back({{i, j}, lie_bracket(f[i], f[j])});
  }
  return scan("goh", P, lambda, grid, tol, ex);
}

ConditionVerdict third_order_condition(const EndpointProblem& P, const AdjointCurve& lambda,
                                       std::span<const double> grid, double tol) {
  const auto& f = P.fields();
  const std::size_t k = P.k();
  std::vector<std::vector<PolyVectorField>> inner(k, std::vector<PolyVectorField>(k));
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t l = 0; l < k; ++l) inner[j][l] = lie_bracket(f[j], f[l]);
  }
  std::vector<Expression> ex;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t l = 0; l < k; ++l) {
        ex.push_back({{i, j, l}, lie_bracket(f[i], inner[j][l]) + lie_bracket(f[l], inner[j][i])});
      }
    }
  }
  ConditionVerdict v = scan("third_order", P, lambda, grid, tol, ex);
  if (P.cokernel().corank() != 1) {
    v.notes.push_back("corank is " + std::to_string(P.cokernel().corank()) + "; the condition is stated for corank 1");
  }
  return v;
}

// ---- singularity ---------------------------------------------------------------------

const char* to_string(Singularity s) {
  switch (s) {
    case Singularity::regular:
      return "regular";
    case Singularity::singular:
      return "singular";
    case Singularity::strictly_singular:
      return "strictly-singular";
  }
  return "unknown";
}

namespace {

void require_nonvanishing(const ControlSignal& u) {
  const std::size_t m = 1001;
  int run = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(m - 1);
    run = u(t).norm() < 1e-12 ? run + 1 : 0;
    if (run >= 2) {
      throw ValidationError("reference control vanishes on an interval; the length differential is undefined");
    }
  }
}

double length_differential(const ControlSignal& u, const ControlSignal& x) {
  std::vector<double> cuts = u.breakpoints();
  for (double b : x.breakpoints()) cuts.push_back(b);
  cuts.push_back(0.0);
  cuts.push_back(1.0);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    total += GK::integrate(
        [&](double t) {
          const Eigen::VectorXd ut = u(t);
          const double nrm = ut.norm();
          return nrm > 0.0 ? ut.dot(x(t)) / nrm : 0.0;
        },
        cuts[s], cuts[s + 1], 12, 1e-13);
  }
  return total;
}

}  // namespace

SingularityReport singularity_classify(const EndpointProblem& P, std::span<const ControlSignal> probes) {
  require_nonvanishing(P.u_ref());
  if (probes.empty()) throw ValidationError("singularity_classify: empty probe basis");
  const auto n = static_cast<Eigen::Index>(P.dim());
  Eigen::MatrixXd A(n + 1, static_cast<Eigen::Index>(probes.size()));
  for (std::size_t j = 0; j < probes.size(); ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    A.block(0, c, n, 1) = first_diff(P, probes[j]);
    A(n, c) = length_differential(P.u_ref(), probes[j]);
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullU);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cut = P.options().svd_rel_tol * (sv.size() > 0 ? sv[0] : 0.0);
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv[rank] > cut && sv[rank] > 0.0) ++rank;

  SingularityReport r;
  for (Eigen::Index c = rank; c < n + 1; ++c) r.annihilators.emplace_back(svd.matrixU().col(c));
  r.extended_corank = r.annihilators.size();
  r.critical = r.extended_corank > 0;
  const double tol = P.options().membership_tol;
  double lam0 = 0.0;
  for (const auto& a : r.annihilators) lam0 = std::max(lam0, std::abs(a[n]));
  r.has_normal = lam0 > tol;
  r.has_abnormal = r.critical && (!r.has_normal || r.extended_corank >= 2);
  if (!r.critical) {
    r.kind = Singularity::regular;
  } else if (!r.has_normal) {
    r.kind = Singularity::strictly_singular;
  } else {
    r.kind = r.has_abnormal ? Singularity::singular : Singularity::regular;
  }
  return r;
}

SingularityReport singularity_classify(const EndpointProblem& P) { return singularity_classify(P, P.probes()); }

// ---- calibration ---------------------------------------------------------------------

namespace {

// Cumulative trapezoid of y over the sample times.
std::vector<double> cumulative(const std::vector<double>& t, const std::vector<double>& y) {
  std::vector<double> c(t.size(), 0.0);
  for (std::size_t i = 1; i < t.size(); ++i) c[i] = c[i - 1] + 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
  return c;
}

}  // namespace

CalibrationResult calibration_evaluate(unsigned p_even, const SampledCurve& eta, double precondition_tol) {
  if (p_even == 0 || p_even % 2 != 0) throw ValidationError("calibration_inequality needs an even exponent p");
  const auto& t = eta.times;
  if (t.size() < 2 || t.size() != eta.controls.size()) throw ValidationError("calibration curve samples malformed");
  if (t.front() != 0.0) throw ValidationError("calibration curve must start at t = 0");
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) throw ValidationError("calibration sample times must increase");
  }
  std::vector<double> u1(t.size());
  std::vector<double> u2(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::abs(eta.controls[i].norm() - 1.0) > precondition_tol) {
      throw ValidationError("calibration curve is not parameterized by arc length");
    }
    u1[i] = eta.controls[i][0];
    u2[i] = eta.controls[i][1];
  }
  const std::vector<double> eta1 = cumulative(t, u1);
  std::vector<double> w(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) w[i] = u2[i] * std::pow(eta1[i], p_even);
  const double c1 = eta1.back();
  const double c2 = cumulative(t, w).back();
  if (std::abs(c1) > precondition_tol || std::abs(c2) > precondition_tol) {
    throw ValidationError("calibration constraints violated (int u1 = " + format_number(c1) +
                          ", int u2 eta1^p = " + format_number(c2) + ")");
  }
  for (std::size_t i = 0; i < t.size(); ++i) w[i] = u2[i] * (1.0 - eta1[i]);
  const double tau = t.back();

  CalibrationResult res;
  res.lhs = cumulative(t, w).back();
  res.slack = tau - res.lhs;
  ConditionVerdict& v = res.verdict;
  v.name = "calibration";
  v.tolerance = precondition_tol;
  v.max_violation = std::max(0.0, -res.slack);
  v.holds = v.max_violation <= precondition_tol;
  v.notes.push_back("slack " + format_number(res.slack));
  const double t0 = 2.0 / (p_even + 1.0);
  if (tau > t0) v.notes.push_back("tau " + format_number(tau) + " exceeds 2/(p+1) = " + format_number(t0));
  return res;
}

ConditionVerdict calibration_inequality(unsigned p_even, const SampledCurve& eta, double precondition_tol) {
  return calibration_evaluate(p_even, eta, precondition_tol).verdict;
}

std::optional<SampledCurve> random_admissible_curve(unsigned p_even, double tau, std::uint64_t seed,
                                                    std::size_t samples) {
  if (p_even == 0 || p_even % 2 != 0) throw ValidationError("random_admissible_curve needs an even exponent p");
  if (!(tau > 0.0) || samples < 3) throw ValidationError("random_admissible_curve: bad horizon or sample count");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  SampledCurve c;
  c.times.resize(samples);
  std::vector<double> u1(samples);
  std::array<double, 6> a{};
  for (auto& x : a) x = coef(rng);
  double peak = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = tau * static_cast<double>(i) / static_cast<double>(samples - 1);
    c.times[i] = t;
    double s = 0.0;
    for (int m = 1; m <= 3; ++m) {
      const double w = two_pi * m * t / tau;
      s += a[static_cast<std::size_t>(2 * m - 2)] * std::sin(w) + a[static_cast<std::size_t>(2 * m - 1)] * std::cos(w);
    }
    // Remove the sampled mean exactly so that eta1(tau) = 0 under the trapezoid rule.
    u1[i] = s;
  }
  const double mean = cumulative(c.times, u1).back() / tau;
  for (auto& x : u1) {
    x -= mean;
    peak = std::max(peak, std::abs(x));
  }
  const double amp = std::uniform_real_distribution<double>(0.1, 0.9)(rng) / std::max(peak, 1e-300);
  for (auto& x : u1) x *= amp;

  const std::vector<double> eta1 = cumulative(c.times, u1);
  std::vector<double> mag(samples);
  for (std::size_t i = 0; i < samples; ++i) mag[i] = std::sqrt(1.0 - u1[i] * u1[i]);

  auto constraint = [&](std::size_t lo, std::size_t hi) {
    std::vector<double> w(samples);
    for (std::size_t i = 0; i < samples; ++i) {
      const double sgn = (i > lo && i <= hi) ? -1.0 : 1.0;
      w[i] = sgn * mag[i] * std::pow(eta1[i], p_even);
    }
    return cumulative(c.times, w).back();
  };
  std::uniform_int_distribution<std::size_t> start(0, samples / 3);
  for (int attempt = 0; attempt < 20; ++attempt) {
    const std::size_t lo = start(rng);
    if (constraint(lo, samples - 1) > 0.0) continue;
    // constraint decreases as the flipped block grows; bisect on its end index
    std::size_t a0 = lo;
    std::size_t b0 = samples - 1;
    while (b0 - a0 > 1) {
      const std::size_t mid = (a0 + b0) / 2;
      (constraint(lo, mid) > 0.0 ? a0 : b0) = mid;
    }
    const std::size_t hi = std::abs(constraint(lo, a0)) < std::abs(constraint(lo, b0)) ? a0 : b0;
    c.controls.resize(samples);
    for (std::size_t i = 0; i < samples; ++i) {
      const double sgn = (i > lo && i <= hi) ? -1.0 : 1.0;
      c.controls[i] = Eigen::Vector2d(u1[i], sgn * mag[i]);
    }
    return c;
  }
  return std::nullopt;
}

}  // namespace endpt
