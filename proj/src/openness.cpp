#include "endpt/openness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "collocation.hpp"
#include "endpt/cubic.hpp"
#include "endpt/errors.hpp"

namespace endpt {

namespace {

using Quad = __float128;
using QJet = Jet<Quad, 3>;

template <class T>
struct Tables {
  detail::CompiledFields<T> fields;
  detail::GaussLegendre<T> gl;
  std::size_t steps;
  std::vector<T> uref;                // node-major, k channels per node
  std::vector<std::vector<T>> basis;  // one table per basis signal
  std::vector<T> q0;
  std::vector<T> ref_end;

  Tables(const EndpointProblem& P, const std::vector<ControlSignal>& sigs, const EvaluatorOptions& o)
      : fields(P.fields()), gl(o.stages), steps(o.steps) {
    const std::size_t s = o.stages;
    const std::size_t k = P.k();
    const T h = T(1) / T(steps);
    auto tabulate = [&](const ControlSignal& c) {
      std::vector<T> out(steps * s * k);
      for (std::size_t n = 0; n < steps; ++n)
        for (std::size_t i = 0; i < s; ++i) {
          const T t = (T(n) + gl.c[i]) * h;
          for (std::size_t ch = 0; ch < k; ++ch) out[(n * s + i) * k + ch] = detail::qtp_value(c.qtp(ch), t);
        }
      return out;
    };
    uref = tabulate(P.u_ref());
    for (const auto& b : sigs) basis.push_back(tabulate(b));
    for (Eigen::Index i = 0; i < P.q0().size(); ++i) q0.push_back(T(P.q0()(i)));
    ref_end = detail::collocate<T, T>(fields, gl, steps, q0, uref, tolerance());
  }

  static T tolerance() {
    if constexpr (std::is_same_v<T, Quad>)
      return T(1e-32);
    else
      return T(4e-19L);
  }

  std::vector<T> controls(const Eigen::VectorXd& a) const {
    std::vector<T> u = uref;
    for (std::size_t j = 0; j < basis.size(); ++j) {
      const double aj = a(static_cast<Eigen::Index>(j));
      if (aj == 0.0) continue;
      const T c(aj);
      for (std::size_t i = 0; i < u.size(); ++i) u[i] += c * basis[j][i];
    }
    return u;
  }

  Eigen::VectorXd deviation(const Eigen::VectorXd& a) const {
    const std::vector<T> end = detail::collocate<T, T>(fields, gl, steps, q0, controls(a), tolerance());
    Eigen::VectorXd d(static_cast<Eigen::Index>(end.size()));
    for (std::size_t r = 0; r < end.size(); ++r) d(static_cast<Eigen::Index>(r)) = static_cast<double>(end[r] - ref_end[r]);
    return d;
  }
};

double factorial(unsigned k) {
  double f = 1.0;
  for (unsigned i = 2; i <= k; ++i) f *= i;
  return f;
}

std::string num(double x) {
  std::ostringstream os;
  os.precision(3);
  os << x;
  return os.str();
}

Eigen::VectorXd unit(Eigen::Index size, Eigen::Index i) { return Eigen::VectorXd::Unit(size, i); }

// Least squares in the span of A's columns with the relative residual it leaves.
struct Solve {
  Eigen::VectorXd x;
  double residual;
};
Solve solve_in(const Eigen::MatrixXd& A, const Eigen::VectorXd& rhs) {
  const Eigen::VectorXd x = A.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);
  return {x, (A * x - rhs).norm() / std::max(1.0, rhs.norm())};
}

// Shared derivative oracle: Taylor coefficients along basis-coefficient directions.
class Derivatives {
 public:
  Derivatives(const EndpointEvaluator& F, Eigen::Index dim) : F_(F), dim_(dim) {}

  Eigen::VectorXd first(const Eigen::VectorXd& a) const { return F_.taylor(a, 1)[1]; }
  // d2F(a, a)
  Eigen::VectorXd quadratic(const Eigen::VectorXd& a) const { return 2.0 * F_.taylor(a, 2)[2]; }
  // d3F(a, a, a)
  Eigen::VectorXd cubic(const Eigen::VectorXd& a) const { return 6.0 * F_.taylor(a, 3)[3]; }

  // d2F(a, b) by polarization of unit-scaled directions.
  Eigen::VectorXd bilinear(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return Eigen::VectorXd::Zero(dim());
    const Eigen::VectorXd ua = a / na;
    const Eigen::VectorXd ub = b / nb;
    return na * nb * 0.25 * (quadratic(ua + ub) - quadratic(ua - ub));
  }

  // d3F(a, a, b) = [C(a + b) - C(a - b) - 2 C(b)] / 6.
  Eigen::VectorXd cubic_aab(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return Eigen::VectorXd::Zero(dim());
    const Eigen::VectorXd ua = a / na;
    const Eigen::VectorXd ub = b / nb;
    return na * na * nb * (cubic(ua + ub) - cubic(ua - ub) - 2.0 * cubic(ub)) / 6.0;
  }

 private:
  Eigen::Index dim() const { return dim_; }
  const EndpointEvaluator& F_;
  Eigen::Index dim_;
};

void require_closed_form(const EndpointProblem& P, const ControlSignal& s, const char* what) {
  if (s.k() != P.k()) throw ValidationError(std::string(what) + ": control has the wrong number of channels");
  if (!s.closed_form()) throw ValidationError(std::string(what) + ": openness needs closed-form controls");
}

// Complement E of the kernel inside the probe span, scaled so d0F(e_i) is orthonormal.
std::vector<ControlSignal> image_complement(const EndpointProblem& P, const Eigen::MatrixXd& first,
                                            std::span<const ControlSignal> probes) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(first, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  std::vector<ControlSignal> E;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > P.options().svd_rel_tol * sv(0)) E.push_back(combine(probes, svd.matrixV().col(i) / sv(i)));
  return E;
}

Eigen::MatrixXd first_matrix(const EndpointProblem& P, std::span<const ControlSignal> probes) {
  Eigen::MatrixXd M(static_cast<Eigen::Index>(P.dim()), static_cast<Eigen::Index>(probes.size()));
  for (std::size_t i = 0; i < probes.size(); ++i) M.col(static_cast<Eigen::Index>(i)) = first_diff(P, probes[i]);
  return M;
}

// Moves the kernel vector a onto the exact kernel along the E slots [e0, e0 + r).
Eigen::VectorXd onto_kernel(const Derivatives& D, const Eigen::MatrixXd& AE, Eigen::Index e0, Eigen::VectorXd a,
                            PerturbationFamily& fam, const std::string& name, double tol) {
  const Eigen::VectorXd d = D.first(a);
  const Solve s = solve_in(AE, d);
  if (s.residual > tol)
    throw ValidationError(name + " is not in ker d0F to tolerance (residual " + num(s.residual) + ")");
  a.segment(e0, AE.cols()) -= s.x;
  fam.residuals["kernel:" + name] = D.first(a).norm();
  return a;
}

}  // namespace

struct EndpointEvaluator::Impl {
  Tables<long double> extended;
  Tables<Quad> quad;
  Impl(const EndpointProblem& P, const std::vector<ControlSignal>& b, const EvaluatorOptions& o)
      : extended(P, b, o), quad(P, b, o) {}
};

EndpointEvaluator::EndpointEvaluator(const EndpointProblem& P, std::vector<ControlSignal> basis, EvaluatorOptions opts)
    : basis_(std::move(basis)) {
  if (opts.steps == 0 || opts.stages == 0) throw ValidationError("EndpointEvaluator: steps and stages must be positive");
  require_closed_form(P, P.u_ref(), "EndpointEvaluator");
  for (const auto& b : basis_) require_closed_form(P, b, "EndpointEvaluator");
  impl_ = std::make_unique<Impl>(P, basis_, opts);
}

EndpointEvaluator::~EndpointEvaluator() = default;
EndpointEvaluator::EndpointEvaluator(EndpointEvaluator&&) noexcept = default;
EndpointEvaluator& EndpointEvaluator::operator=(EndpointEvaluator&&) noexcept = default;

Eigen::VectorXd EndpointEvaluator::deviation(const Eigen::VectorXd& a, Precision p) const {
  if (static_cast<std::size_t>(a.size()) != basis_.size())
    throw ValidationError("EndpointEvaluator: coefficient count does not match the basis");
  return p == Precision::quad ? impl_->quad.deviation(a) : impl_->extended.deviation(a);
}

std::vector<Eigen::VectorXd> EndpointEvaluator::taylor(const Eigen::VectorXd& a, unsigned order) const {
  if (order > 3) throw ValidationError("EndpointEvaluator::taylor: order at most 3");
  if (static_cast<std::size_t>(a.size()) != basis_.size())
    throw ValidationError("EndpointEvaluator: coefficient count does not match the basis");
  const auto& t = impl_->quad;
  const std::vector<Quad> w = [&] {
    std::vector<Quad> dir(t.uref.size(), Quad(0));
    for (std::size_t j = 0; j < t.basis.size(); ++j) {
      const Quad c(a(static_cast<Eigen::Index>(j)));
      if (c == Quad(0)) continue;
      for (std::size_t i = 0; i < dir.size(); ++i) dir[i] += c * t.basis[j][i];
    }
    return dir;
  }();
  std::vector<QJet> u(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) u[i] = QJet::variable(t.uref[i], w[i]);
  std::vector<QJet> q0(t.q0.begin(), t.q0.end());
  const std::vector<QJet> end = detail::collocate<Quad, QJet>(t.fields, t.gl, t.steps, q0, u, Quad(1e-32));
  std::vector<Eigen::VectorXd> out(order + 1, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(end.size())));
  for (std::size_t r = 0; r < end.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    out[0](i) = static_cast<double>(end[r].c[0] - t.ref_end[r]);
    for (unsigned j = 1; j <= order; ++j) out[j](i) = static_cast<double>(end[r].c[j]);
  }
  return out;
}

unsigned long long taylor_constant(std::span<const unsigned> orders) {
  if (orders.empty()) throw ValidationError("taylor_constant: empty order list");
  unsigned k = 0;
  for (unsigned h : orders) {
    if (h == 0) throw ValidationError("taylor_constant: orders must be positive");
    k += h;
  }
  if (k > 20) throw ValidationError("taylor_constant: total order above 20");
  // Multinomial k!/(prod h!) built from binomials, then divided by the multiplicities.
  unsigned long long c = 1;
  unsigned acc = 0;
  for (unsigned h : orders) {
    acc += h;
    unsigned long long b = 1;
    for (unsigned i = 1; i <= h; ++i) b = b * (acc - h + i) / i;
    c *= b;
  }
  std::vector<unsigned> sorted(orders.begin(), orders.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    for (std::size_t m = 2; m <= j - i; ++m) c /= m;
    i = j;
  }
  return c;
}

const char* to_string(FamilyKind k) { return k == FamilyKind::corank1 ? "corank1" : "general"; }

Eigen::VectorXd PerturbationFamily::controls(const Eigen::VectorXd& params, double eps) const {
  if (static_cast<std::size_t>(params.size()) != param_dim())
    throw ValidationError("PerturbationFamily: parameter dimension mismatch");
  Eigen::VectorXd a = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.size()));
  for (const auto& term : terms) {
    double w = std::pow(eps, term.power) / factorial(term.power);
    for (std::size_t p : term.params) w *= params(static_cast<Eigen::Index>(p));
    if (w != 0.0) a += w * term.coef;
  }
  return a;
}

Eigen::VectorXd PerturbationFamily::unroot(const Eigen::VectorXd& p) const {
  Eigen::VectorXd raw = p;
  for (std::size_t i = 0; i < roots.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    if (roots[i] != 1) raw(j) = std::copysign(std::pow(std::abs(p(j)), 1.0 / roots[i]), p(j));
  }
  return raw;
}

PerturbationFamily build_corank1_family(const EndpointProblem& P, const Eigen::VectorXd& lambda,
                                        const ControlSignal& v, const FamilyOptions& opts) {
  require_closed_form(P, v, "build_corank1_family");
  const std::size_t corank = P.cokernel().corank();
  if (corank == 0) throw ValidationError("build_corank1_family: corank 0, d0F is already onto");
  if (corank > 1) throw ValidationError("build_corank1_family: corank " + std::to_string(corank) + " is not one");
  if (!dom3_membership(P, v)) throw ValidationError("build_corank1_family: v is outside the third-order domain");
  const Eigen::VectorXd l = lambda.normalized();
  const double third = third_scalar(P, l, v);
  if (std::abs(third) <= P.options().membership_tol)
    throw ValidationError("build_corank1_family: third differential vanishes at v");

  PerturbationFamily fam;
  fam.kind = FamilyKind::corank1;
  fam.epsilon = opts.epsilon;
  fam.order = 9;
  const std::vector<ControlSignal> E = image_complement(P, first_matrix(P, P.probes()), P.probes());
  const auto r = static_cast<Eigen::Index>(E.size());
  fam.basis.push_back(v);
  fam.basis.insert(fam.basis.end(), E.begin(), E.end());
  const Eigen::Index nb = r + 1;
  const EndpointEvaluator F(P, fam.basis, opts.evaluator);
  const Derivatives D(F, static_cast<Eigen::Index>(P.dim()));

  Eigen::MatrixXd AE(static_cast<Eigen::Index>(P.dim()), r);
  for (Eigen::Index i = 0; i < r; ++i) AE.col(i) = D.first(unit(nb, i + 1));
  const Eigen::VectorXd vc = onto_kernel(D, AE, 1, unit(nb, 0), fam, "v", opts.residual_tol);

  const auto taylor = F.taylor(vc, 3);
  const Eigen::VectorXd Qvv = 2.0 * taylor[2];
  const Eigen::VectorXd third_vec = 6.0 * taylor[3];

  auto in_E = [&](const Eigen::VectorXd& coords) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(nb);
    a.tail(r) = coords;
    return a;
  };
  const Solve z0 = solve_in(AE, -10.0 * Qvv);
  fam.residuals["z0"] = z0.residual;
  if (z0.residual > opts.residual_tol)
    throw ValidationError("build_corank1_family: d2F(v, v) is not in the image (residual " + num(z0.residual) + ")");
  const Eigen::VectorXd z0a = in_E(z0.x);
  const Solve z1 = solve_in(AE, -84.0 * D.bilinear(vc, z0a));
  fam.residuals["z1"] = z1.residual;
  if (z1.residual > opts.residual_tol)
    throw ValidationError("build_corank1_family: d2F(v, z0) is not in the image (residual " + num(z1.residual) + ")");
  const Eigen::VectorXd z1a = in_E(z1.x);

  // Parameters: x_1..x_r, then y.
  const auto y = static_cast<std::size_t>(r);
  fam.terms.push_back({3, {y, y, y}, vc});
  fam.terms.push_back({6, std::vector<std::size_t>(6, y), z0a});
  fam.terms.push_back({9, std::vector<std::size_t>(9, y), z1a});
  for (Eigen::Index i = 0; i < r; ++i) fam.terms.push_back({9, {static_cast<std::size_t>(i)}, unit(nb, i + 1)});
  fam.roots.assign(y, 1);
  fam.roots.push_back(9);

  const double f9 = factorial(9);
  fam.leading.resize(static_cast<Eigen::Index>(P.dim()), r + 1);
  fam.leading.leftCols(r) = AE / f9;
  fam.leading.col(r) = 280.0 * third_vec / f9;
  fam.surjective = fam.leading.rows() == fam.leading.cols() &&
                   Eigen::FullPivLU<Eigen::MatrixXd>(fam.leading).rank() == fam.leading.rows();

  fam.vectors["v"] = vc;
  fam.vectors["z0"] = z0a;
  fam.vectors["z1"] = z1a;
  fam.vectors["d3F(v)"] = third_vec;
  fam.vectors["d2F(v,v)"] = Qvv;
  fam.residuals["lambda.d2F(v,v)"] = std::abs(l.dot(Qvv));
  fam.notes.push_back("lambda.d3F(v) = " + num(l.dot(third_vec)) + ", third_scalar = " + num(third));
  return fam;
}

PerturbationFamily build_general_family(const EndpointProblem& P, std::span<const Eigen::VectorXd> lambdas,
                                        const ControlSignal& w0, const ControlSignal& v0,
                                        const FamilyOptions& opts) {
  require_closed_form(P, w0, "build_general_family");
  require_closed_form(P, v0, "build_general_family");
  if (lambdas.empty()) throw ValidationError("build_general_family: trivial cokernel, nothing to build");
  const W0Verdict pre = w0_regular_zero_check(P, lambdas, w0, v0, P.probes(), P.options().membership_tol);
  if (pre.status == W0Status::precondition_failed)
    throw ValidationError("build_general_family: " + (pre.notes.empty() ? std::string("precondition") : pre.notes[0]));

  PerturbationFamily fam;
  fam.kind = FamilyKind::general;
  fam.epsilon = opts.epsilon;
  fam.order = 19;
  if (!pre.regular_zero) fam.notes.emplace_back("v0 is not a w0-regular zero on the probes");

  const auto probes = P.probes();
  const ProbeCalculus pc = probe_calculus(P, lambdas, probes);
  const double rel = P.options().svd_rel_tol;
  const auto cor = static_cast<Eigen::Index>(lambdas.size());
  const auto m = static_cast<Eigen::Index>(probes.size());

  const std::vector<ControlSignal> E1 = image_complement(P, pc.first, probes);

  // E2: kernel directions carried isomorphically onto Im(F, 2, w0).
  Eigen::MatrixXd W(cor, m);
  for (Eigen::Index j = 0; j < cor; ++j)
    for (Eigen::Index i = 0; i < m; ++i)
      W(j, i) = hessian_scalar(P, lambdas[static_cast<std::size_t>(j)], w0, probes[static_cast<std::size_t>(i)],
                               IntegrationPath::automatic, false);
  const Eigen::MatrixXd image = W * pc.kernel;
  const Eigen::JacobiSVD<Eigen::MatrixXd> s2(image, Eigen::ComputeFullU | Eigen::ComputeThinV);
  std::vector<ControlSignal> E2;
  Eigen::Index m2 = 0;
  for (Eigen::Index i = 0; i < s2.singularValues().size(); ++i) {
    const double sv = s2.singularValues()(i);
    if (sv <= std::max(rel * s2.singularValues()(0), P.options().membership_tol)) break;
    E2.push_back(combine(probes, pc.kernel * s2.matrixV().col(i) / sv));
    ++m2;
  }
  const Eigen::MatrixXd coker2 = s2.matrixU().rightCols(cor - m2);

  // E3: domain directions carried onto coker(F, 2, w0) by x -> D3(v0, v0, x).
  Eigen::MatrixXd B(cor, m);
  for (Eigen::Index j = 0; j < cor; ++j)
    for (Eigen::Index i = 0; i < m; ++i)
      B(j, i) = trilinear(P, lambdas[static_cast<std::size_t>(j)], v0, v0, probes[static_cast<std::size_t>(i)],
                          IntegrationPath::automatic, false);
  std::vector<ControlSignal> E3;
  if (coker2.cols() > 0 && pc.domain.cols() > 0) {
    const Eigen::MatrixXd S = coker2.transpose() * B * pc.domain;
    const Eigen::JacobiSVD<Eigen::MatrixXd> s3(S, Eigen::ComputeThinU | Eigen::ComputeThinV);
    for (Eigen::Index i = 0; i < s3.singularValues().size(); ++i) {
      const double sv = s3.singularValues()(i);
      if (sv <= std::max(rel * s3.singularValues()(0), P.options().membership_tol)) break;
      E3.push_back(combine(probes, pc.domain * s3.matrixV().col(i) / sv));
    }
  }
  const auto m1 = static_cast<Eigen::Index>(E1.size());
  const auto m3 = static_cast<Eigen::Index>(E3.size());
  if (static_cast<std::size_t>(m1 + m2 + m3) != P.dim()) {
    fam.surjective = false;
    fam.notes.push_back("m1 + m2 + m3 = " + std::to_string(m1 + m2 + m3) + " differs from dim M = " +
                        std::to_string(P.dim()));
  }

  // Basis layout: v0, w0, E1, E2, E3.
  fam.basis = {v0, w0};
  fam.basis.insert(fam.basis.end(), E1.begin(), E1.end());
  fam.basis.insert(fam.basis.end(), E2.begin(), E2.end());
  fam.basis.insert(fam.basis.end(), E3.begin(), E3.end());
  const Eigen::Index nb = 2 + m1 + m2 + m3;
  const Eigen::Index o1 = 2, o2 = 2 + m1, o3 = 2 + m1 + m2;
  const EndpointEvaluator F(P, fam.basis, opts.evaluator);
  const Derivatives D(F, static_cast<Eigen::Index>(P.dim()));
  const double tol = opts.residual_tol;

  Eigen::MatrixXd A1(static_cast<Eigen::Index>(P.dim()), m1);
  for (Eigen::Index i = 0; i < m1; ++i) A1.col(i) = D.first(unit(nb, o1 + i));
  const Eigen::VectorXd v0c = onto_kernel(D, A1, o1, unit(nb, 0), fam, "v0", tol);
  const Eigen::VectorXd w0c = onto_kernel(D, A1, o1, unit(nb, 1), fam, "w0", tol);
  std::vector<Eigen::VectorXd> eb, e;
  for (Eigen::Index l = 0; l < m2; ++l)
    eb.push_back(onto_kernel(D, A1, o1, unit(nb, o2 + l), fam, "E2[" + std::to_string(l) + "]", tol));
  for (Eigen::Index i = 0; i < m3; ++i)
    e.push_back(onto_kernel(D, A1, o1, unit(nb, o3 + i), fam, "E3[" + std::to_string(i) + "]", tol));

  auto c2 = [](unsigned a, unsigned b) {
    const std::array<unsigned, 2> o{a, b};
    return static_cast<double>(taylor_constant(o));
  };
  auto c3 = [](unsigned a, unsigned b, unsigned c) {
    const std::array<unsigned, 3> o{a, b, c};
    return static_cast<double>(taylor_constant(o));
  };
  auto in_E1 = [&](const Eigen::VectorXd& coords) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(nb);
    a.segment(o1, m1) = coords;
    return a;
  };
  auto solve = [&](const std::string& name, const Eigen::VectorXd& rhs) {
    const Solve s = solve_in(A1, rhs);
    fam.residuals[name] = s.residual;
    if (s.residual > tol)
      throw ValidationError("build_general_family: right-hand side of " + name + " is not in the image (residual " +
                            num(s.residual) + ")");
    const Eigen::VectorXd a = in_E1(s.x);
    fam.vectors[name] = a;
    return a;
  };

  const Eigen::VectorXd nu = solve("nu", -c2(6, 6) * D.quadratic(v0c));
  std::vector<Eigen::VectorXd> eta(static_cast<std::size_t>(m3)), xi_i(static_cast<std::size_t>(m3));
  for (Eigen::Index i = 0; i < m3; ++i) {
    const std::string id = "[" + std::to_string(i) + "]";
    eta[static_cast<std::size_t>(i)] = solve("eta" + id, -c2(6, 7) * D.bilinear(v0c, e[static_cast<std::size_t>(i)]));
  }
  const Eigen::VectorXd xi = solve("xi", -c2(6, 8) * D.bilinear(v0c, w0c));
  std::vector<std::vector<Eigen::VectorXd>> eta2(static_cast<std::size_t>(m3),
                                                 std::vector<Eigen::VectorXd>(static_cast<std::size_t>(m3)));
  for (Eigen::Index i = 0; i < m3; ++i)
    for (Eigen::Index j = i; j < m3; ++j) {
      const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(j);
      const Eigen::VectorXd rhs = i == j ? Eigen::VectorXd(-c2(7, 7) * D.quadratic(e[a]))
                                         : Eigen::VectorXd(-c2(7, 7) * D.bilinear(e[a], e[b]));
      eta2[a][b] = solve("eta[" + std::to_string(i) + "," + std::to_string(j) + "]", rhs);
      eta2[b][a] = eta2[a][b];
    }
  for (Eigen::Index i = 0; i < m3; ++i)
    xi_i[static_cast<std::size_t>(i)] =
        solve("xi[" + std::to_string(i) + "]", -c2(7, 8) * D.bilinear(e[static_cast<std::size_t>(i)], w0c));
  const Eigen::VectorXd mu = solve("mu", -c2(8, 8) * D.quadratic(w0c));
  std::vector<Eigen::VectorXd> zeta_l(static_cast<std::size_t>(m2));
  for (Eigen::Index l = 0; l < m2; ++l)
    zeta_l[static_cast<std::size_t>(l)] =
        solve("zeta[" + std::to_string(l) + "]", -c2(6, 11) * D.bilinear(v0c, eb[static_cast<std::size_t>(l)]));
  const Eigen::VectorXd zeta = solve("zeta", -(c2(6, 12) * D.bilinear(v0c, nu) + c3(6, 6, 6) * D.cubic(v0c)));
  std::vector<std::vector<Eigen::VectorXd>> zeta_il(static_cast<std::size_t>(m3),
                                                    std::vector<Eigen::VectorXd>(static_cast<std::size_t>(m2)));
  for (Eigen::Index i = 0; i < m3; ++i)
    for (Eigen::Index l = 0; l < m2; ++l)
      zeta_il[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)] =
          solve("zeta[" + std::to_string(i) + "," + std::to_string(l) + "]",
                -c2(7, 11) * D.bilinear(e[static_cast<std::size_t>(i)], eb[static_cast<std::size_t>(l)]));
  std::vector<Eigen::VectorXd> mu_i(static_cast<std::size_t>(m3));
  for (Eigen::Index i = 0; i < m3; ++i) {
    const auto a = static_cast<std::size_t>(i);
    mu_i[a] = solve("mu[" + std::to_string(i) + "]",
                    -(c2(6, 13) * D.bilinear(v0c, eta[a]) + c2(7, 12) * D.bilinear(e[a], nu)));
  }

  // Parameters: r (m1), s (m2), t (m3).
  const auto R = [&](Eigen::Index i) { return static_cast<std::size_t>(i); };
  const auto Sx = [&](Eigen::Index l) { return static_cast<std::size_t>(m1 + l); };
  const auto Tx = [&](Eigen::Index i) { return static_cast<std::size_t>(m1 + m2 + i); };
  fam.terms.push_back({6, {}, v0c});
  fam.terms.push_back({8, {}, w0c});
  fam.terms.push_back({12, {}, nu});
  fam.terms.push_back({14, {}, xi});
  fam.terms.push_back({16, {}, mu});
  fam.terms.push_back({18, {}, zeta});
  for (Eigen::Index i = 0; i < m3; ++i) {
    const auto a = static_cast<std::size_t>(i);
    fam.terms.push_back({7, {Tx(i)}, e[a]});
    fam.terms.push_back({13, {Tx(i)}, eta[a]});
    fam.terms.push_back({15, {Tx(i)}, xi_i[a]});
    fam.terms.push_back({19, {Tx(i)}, mu_i[a]});
    for (Eigen::Index j = 0; j < m3; ++j) fam.terms.push_back({14, {Tx(i), Tx(j)}, eta2[a][static_cast<std::size_t>(j)]});
    for (Eigen::Index l = 0; l < m2; ++l) fam.terms.push_back({18, {Tx(i), Sx(l)}, zeta_il[a][static_cast<std::size_t>(l)]});
  }
  for (Eigen::Index l = 0; l < m2; ++l) {
    fam.terms.push_back({11, {Sx(l)}, eb[static_cast<std::size_t>(l)]});
    fam.terms.push_back({17, {Sx(l)}, zeta_l[static_cast<std::size_t>(l)]});
  }
  for (Eigen::Index i = 0; i < m1; ++i) fam.terms.push_back({19, {R(i)}, unit(nb, o1 + i)});
  fam.roots.assign(static_cast<std::size_t>(m1 + m2 + m3), 1);

  const double f19 = factorial(19);
  fam.leading.resize(static_cast<Eigen::Index>(P.dim()), m1 + m2 + m3);
  fam.leading.leftCols(m1) = A1 / f19;
  for (Eigen::Index l = 0; l < m2; ++l)
    fam.leading.col(m1 + l) = c2(8, 11) * D.bilinear(w0c, eb[static_cast<std::size_t>(l)]) / f19;
  for (Eigen::Index i = 0; i < m3; ++i)
    fam.leading.col(m1 + m2 + i) = c3(6, 6, 7) * D.cubic_aab(v0c, e[static_cast<std::size_t>(i)]) / f19;
  if (fam.surjective)
    fam.surjective = Eigen::FullPivLU<Eigen::MatrixXd>(fam.leading).rank() == fam.leading.rows();
  fam.vectors["v0"] = v0c;
  fam.vectors["w0"] = w0c;
  return fam;
}

std::vector<Eigen::VectorXd> ball_targets(std::size_t dim, std::size_t samples, double radius) {
  if (dim == 0 || samples == 0) throw ValidationError("ball_targets: empty lattice");
  auto per_axis = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(samples), 1.0 / dim)));
  per_axis = std::max<std::size_t>(per_axis, 1);
  std::size_t total = 1;
  for (std::size_t i = 0; i < dim; ++i) total *= per_axis;
  std::vector<Eigen::VectorXd> out;
  out.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(dim));
    std::size_t rest = idx;
    for (std::size_t d = 0; d < dim; ++d) {
      const std::size_t c = rest % per_axis;
      rest /= per_axis;
      x(static_cast<Eigen::Index>(d)) = per_axis == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(c) / (per_axis - 1);
    }
    // Cube to ball: keep the direction, use the sup norm as radius.
    const double two = x.norm();
    if (two > 0.0) x *= x.cwiseAbs().maxCoeff() / two;
    out.push_back(radius * x);
  }
  return out;
}

CoverageResult ball_cover_verify(const PerturbationFamily& family, const EndpointEvaluator& F,
                                 const BallCoverOptions& opts) {
  if (!(opts.delta > 0.0)) throw ValidationError("ball_cover_verify: delta must be positive");
  const double eps = opts.epsilon > 0.0 ? opts.epsilon : family.epsilon;
  if (!(eps > 0.0)) throw ValidationError("ball_cover_verify: epsilon must be positive");
  if (F.basis_size() != family.basis.size()) throw ValidationError("ball_cover_verify: evaluator basis mismatch");
  CoverageResult out;
  out.epsilon = eps;
  out.delta = opts.delta;
  out.tol = opts.tol;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(family.leading);
  if (family.leading.rows() != family.leading.cols() || !lu.isInvertible()) {
    out.notes.emplace_back("leading Jacobian is singular; fixed-point map undefined");
    return out;
  }
  const Eigen::MatrixXd Linv = lu.inverse();
  const double scale = std::pow(eps, family.order);
  const auto psi_hat = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
    return Linv * F.deviation(family.controls(family.unroot(p), eps), opts.precision) / scale;
  };
  for (const auto& xi : ball_targets(family.param_dim(), opts.samples, 0.5 * opts.delta)) {
    TargetResult tr;
    tr.target = xi;
    Eigen::VectorXd p = xi;
    try {
      for (tr.iterations = 1; tr.iterations <= opts.max_iter; ++tr.iterations) {
        const Eigen::VectorXd psi = psi_hat(p);
        tr.residual = (psi - xi).norm();
        if (!std::isfinite(tr.residual)) {
          tr.diverged = true;
          break;
        }
        if (tr.residual <= 0.05 * opts.tol) break;
        p = xi + p - psi;
        if (p.norm() > 100.0 * opts.delta) {
          tr.diverged = true;
          break;
        }
      }
      tr.iterations = std::min(tr.iterations, opts.max_iter);
    } catch (const NumericError&) {
      tr.diverged = true;
    }
    tr.solution = p;
    tr.reached = !tr.diverged && tr.residual <= opts.tol && p.norm() <= opts.delta;
    if (tr.reached) {
      ++out.reached;
      out.max_radius_ratio = std::max(out.max_radius_ratio, p.norm() / opts.delta);
    }
    out.targets.push_back(std::move(tr));
  }
  out.fraction = out.targets.empty() ? 0.0 : static_cast<double>(out.reached) / out.targets.size();
  out.certified = out.reached == out.targets.size() && !out.targets.empty();
  if (!out.certified) out.notes.emplace_back("partial coverage; no verdict outside the small-delta regime");
  return out;
}

ExpansionCheck expansion_check(const PerturbationFamily& family, const EndpointEvaluator& F,
                               const Eigen::VectorXd& params, std::span<const double> eps) {
  if (eps.size() < 2) throw ValidationError("expansion_check: need at least two epsilon values");
  Eigen::VectorXd rooted = params;
  for (std::size_t i = 0; i < family.roots.size(); ++i)
    rooted(static_cast<Eigen::Index>(i)) = std::pow(params(static_cast<Eigen::Index>(i)), family.roots[i]);
  ExpansionCheck out;
  for (double e : eps) {
    const Eigen::VectorXd phi = F.deviation(family.controls(params, e), Precision::quad);
    out.eps.push_back(e);
    out.remainder.push_back((phi - std::pow(e, family.order) * family.leading * rooted).norm());
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    mx += std::log(out.eps[i]);
    my += std::log(out.remainder[i]);
  }
  mx /= eps.size();
  my /= eps.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double dx = std::log(out.eps[i]) - mx;
    sxy += dx * (std::log(out.remainder[i]) - my);
    sxx += dx * dx;
  }
  out.slope = sxy / sxx;
  return out;
}

std::string coverage_csv(const CoverageResult& r) {
  std::ostringstream os;
  os.precision(17);
  const std::size_t m = r.targets.empty() ? 0 : static_cast<std::size_t>(r.targets.front().target.size());
  os << "index";
  for (std::size_t i = 0; i < m; ++i) os << ",xi_" << i + 1;
  os << ",reached,diverged,iterations,residual\n";
  for (std::size_t k = 0; k < r.targets.size(); ++k) {
    const auto& t = r.targets[k];
    os << k;
    for (Eigen::Index i = 0; i < t.target.size(); ++i) os << ',' << t.target(i);
    os << ',' << (t.reached ? 1 : 0) << ',' << (t.diverged ? 1 : 0) << ',' << t.iterations << ',' << t.residual
       << '\n';
  }
  return os.str();
}

namespace {

void verify(OpennessVerdict& out, const EndpointProblem& P, const OpennessOptions& opts, BallCoverOptions cover,
            double slope_min) {
  const PerturbationFamily& fam = *out.family;
  if (!fam.surjective) {
    out.reason = "leading map is not onto";
    return;
  }
  const EndpointEvaluator F(P, fam.basis, opts.family.evaluator);
  out.coverage = ball_cover_verify(fam, F, cover);
  // Generic interior point; the last rooted parameter at 1 so every block contributes.
  Eigen::VectorXd p = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(fam.param_dim()), 0.5);
  p(p.size() - 1) = 1.0;
  out.expansion = expansion_check(fam, F, p, opts.slope_eps);
  const bool slope_ok = out.expansion->slope >= slope_min;
  out.certified = out.coverage->certified && slope_ok;
  if (!out.coverage->certified)
    out.reason = "coverage " + num(out.coverage->fraction);
  else if (!slope_ok)
    out.reason = "expansion slope " + num(out.expansion->slope) + " below " + num(slope_min);
  else
    out.reason = "ball covered and leading-order expansion confirmed";
}

}  // namespace

OpennessVerdict openness_corank1(const EndpointProblem& P, const Eigen::VectorXd& lambda, const ControlSignal& v,
                                 const OpennessOptions& opts) {
  OpennessVerdict out;
  try {
    out.family = build_corank1_family(P, lambda, v, opts.family);
  } catch (const ValidationError& e) {
    out.reason = std::string("construction inapplicable: ") + e.what();
    return out;
  }
  verify(out, P, opts, opts.cover, opts.slope_min);
  return out;
}

OpennessVerdict openness_general(const EndpointProblem& P, std::span<const Eigen::VectorXd> lambdas,
                                 const ControlSignal& w0, const ControlSignal& v0, const OpennessOptions& opts) {
  OpennessVerdict out;
  try {
    out.family = build_general_family(P, lambdas, w0, v0, opts.family);
  } catch (const ValidationError& e) {
    out.reason = std::string("construction inapplicable: ") + e.what();
    return out;
  }
  BallCoverOptions cover = opts.cover;
  cover.precision = Precision::quad;
  verify(out, P, opts, cover, out.family->order + 0.5);
  return out;
}

}  // namespace endpt
