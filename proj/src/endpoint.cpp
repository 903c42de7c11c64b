#include "endpt/endpoint.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <string>

#include "endpt/errors.hpp"

namespace endpt {

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 31>;

// Moves t into parameter slot n + slot of an (n + 3)-variable space.
PolyVectorField retime(const PolyVectorField& g, std::size_t slot) {
  const std::size_t n = g.dim();
  const std::size_t N = n + 3;
  std::vector<Polynomial> subs;
  for (std::size_t j = 0; j < n; ++j) subs.push_back(Polynomial::variable(N, j));
  return g.compose(subs, Polynomial::variable(N, n + slot));
}

// Evaluates a retimed bracket at q1, leaving polynomials in the first d slots.
std::vector<Polynomial> at_q1(const PolyVectorField& B, const Eigen::VectorXd& q1, std::size_t d) {
  const std::size_t n = B.dim();
  std::vector<Polynomial> subs;
  for (std::size_t j = 0; j < n; ++j) subs.push_back(Polynomial::constant(d, q1[static_cast<Eigen::Index>(j)]));
  for (std::size_t r = 0; r < 3; ++r) subs.push_back(r < d ? Polynomial::variable(d, r) : Polynomial(d));
  std::vector<Polynomial> out;
  for (std::size_t r = 0; r < n; ++r) out.push_back(B[r].compose(subs, Polynomial(d)).pruned(1e-14));
  return out;
}

Polynomial pair(const Eigen::VectorXd& lambda, const std::vector<Polynomial>& comps) {
  Polynomial s(comps.front().nvars());
  for (std::size_t r = 0; r < comps.size(); ++r) {
    const double l = lambda[static_cast<Eigen::Index>(r)];
    if (l != 0.0 && !comps[r].is_zero()) s += l * comps[r];
  }
  return s;
}

void check_signal(const EndpointProblem& P, const ControlSignal& v) {
  if (v.k() != P.k()) throw ValidationError("perturbation has " + std::to_string(v.k()) + " channels, expected " +
                                            std::to_string(P.k()));
}

void check_covector(const EndpointProblem& P, const Eigen::VectorXd& lambda) {
  if (static_cast<std::size_t>(lambda.size()) != P.dim()) throw ValidationError("covector dimension mismatch");
}

bool use_closed_form(IntegrationPath path, std::initializer_list<const ControlSignal*> vs) {
  const bool closed = std::all_of(vs.begin(), vs.end(), [](const ControlSignal* v) { return v->closed_form(); });
  if (path == IntegrationPath::closed_form && !closed) {
    throw ValidationError("closed-form integration needs quasi-trigonometric signals");
  }
  return path != IntegrationPath::quadrature && closed;
}

// Sum over channel tuples of simplex integrals; sig(a, r) is the signal multiplying slot r.
template <std::size_t D, class Kernel, class Signal>
double contract(const EndpointProblem& P, bool closed, Kernel kernel, Signal sig) {
  const std::size_t k = P.k();
  std::array<std::size_t, D> idx{};
  std::vector<std::pair<std::array<std::size_t, D>, Polynomial>> live;
  for (;;) {
    Polynomial L = kernel(idx);
    if (!L.is_zero()) live.emplace_back(idx, std::move(L));
    std::size_t p = 0;
    while (p < D && ++idx[p] == k) idx[p++] = 0;
    if (p == D) break;
  }
  if (closed) {
    double total = 0.0;
    for (const auto& [ix, L] : live) {
      std::array<QuasiTrigPoly, D> s;
      for (std::size_t r = 0; r < D; ++r) s[r] = sig(ix, r).qtp(ix[r]);
      total += simplex_closed_form(L, s);
    }
    return total;
  }
  const auto f = [&](std::span<const double> s) {
    double acc = 0.0;
    for (const auto& [ix, L] : live) {
      double w = L.eval(s, 0.0);
      for (std::size_t r = 0; r < D; ++r) w *= sig(ix, r).channel_value(ix[r], s[r]);
      acc += w;
    }
    return acc;
  };
  return simplex_integrate(f, static_cast<int>(D)).value;
}

std::vector<double> segment_bounds(const std::vector<double>& bps) {
  std::vector<double> b{0.0};
  for (double x : bps) {
    if (x > b.back() && x < 1.0) b.push_back(x);
  }
  b.push_back(1.0);
  return b;
}

}  // namespace

// ---- problem ------------------------------------------------------------------------

EndpointProblem::EndpointProblem(std::vector<PolyVectorField> fields, ControlSignal u_ref, Eigen::VectorXd q0,
                                 EndpointOptions opts)
    : fields_(std::move(fields)),
      u_(std::move(u_ref)),
      q0_(std::move(q0)),
      opts_(opts),
      flow_([&] {
        if (fields_.empty()) throw ValidationError("end-point problem needs at least one field");
        for (const auto& f : fields_) {
          if (f.dim() != fields_.front().dim() || f.nvars() != f.dim()) {
            throw ValidationError("control fields must share one state dimension and have no parameters");
          }
        }
        if (u_.k() != fields_.size()) throw ValidationError("reference control has the wrong channel count");
        if (static_cast<std::size_t>(q0_.size()) != fields_.front().dim()) {
          throw ValidationError("initial point has the wrong dimension");
        }
        return picard_flow(fields_, u_, 0.0, opts_.flow);
      }()) {
  q1_ = flow_(q0_, 1.0);
  if (exact()) {
    for (std::size_t i = 0; i < k(); ++i) {
      pullbacks_.push_back(pullback_field(flow_, i));
      pullbacks_q1_.push_back(at_point(pullbacks_[i].components(), q1_));
    }
    std::vector<std::array<PolyVectorField, 3>> timed;
    for (const auto& g : pullbacks_) timed.push_back({retime(g, 0), retime(g, 1), retime(g, 2)});
    const std::size_t kk = k();
    brackets_.second.assign(kk, std::vector<std::vector<Polynomial>>(kk));
    brackets_.third.assign(kk, std::vector<std::vector<std::vector<Polynomial>>>(
                                   kk, std::vector<std::vector<Polynomial>>(kk)));
    brackets_.third_reversed = brackets_.third;
    // Slots: 0 = s1, 1 = s2, 2 = s3; first index is the outer field.
    for (std::size_t a = 0; a < kk; ++a) {
      for (std::size_t b = 0; b < kk; ++b) brackets_.second[a][b] = at_q1(lie_bracket(timed[a][1], timed[b][0]), q1_, 2);
    }
    for (std::size_t b = 0; b < kk; ++b) {
      for (std::size_t c = 0; c < kk; ++c) {
        const PolyVectorField inner_fwd = lie_bracket(timed[b][1], timed[c][0]);
        const PolyVectorField inner_rev = lie_bracket(timed[b][1], timed[c][2]);
        for (std::size_t a = 0; a < kk; ++a) {
          brackets_.third[a][b][c] = at_q1(lie_bracket(timed[a][2], inner_fwd), q1_, 3);
          brackets_.third_reversed[a][b][c] = at_q1(lie_bracket(timed[a][0], inner_rev), q1_, 3);
        }
      }
    }
  }
  probes_ = default_probe_basis(k(), opts_.probe_max_freq);
  coker_ = endpt::cokernel(*this, uniform_grid(opts_.grid_points));
}

void EndpointProblem::require_exact(const char* what) const {
  if (!exact()) throw ValidationError(std::string(what) + " needs the exact flow backend");
}

const std::vector<PolyVectorField>& EndpointProblem::pullbacks() const {
  require_exact("symbolic pullbacks");
  return pullbacks_;
}

const std::vector<std::vector<Polynomial>>& EndpointProblem::pullbacks_at_q1() const {
  require_exact("symbolic pullbacks");
  return pullbacks_q1_;
}

const BracketTables& EndpointProblem::brackets() const {
  require_exact("second and third differentials");
  return brackets_;
}

Eigen::MatrixXd EndpointProblem::image_vectors(double t) const {
  const auto n = static_cast<Eigen::Index>(dim());
  Eigen::MatrixXd G(n, static_cast<Eigen::Index>(k()));
  if (exact()) {
    for (std::size_t i = 0; i < k(); ++i) {
      for (Eigen::Index r = 0; r < n; ++r) {
        G(r, static_cast<Eigen::Index>(i)) = pullbacks_q1_[i][static_cast<std::size_t>(r)].eval({}, t);
      }
    }
    return G;
  }
  const Eigen::VectorXd y = flow_.transport(q1_, 1.0, t);
  const Eigen::MatrixXd M = flow_.jacobian(y, t, 1.0);
  for (std::size_t i = 0; i < k(); ++i) G.col(static_cast<Eigen::Index>(i)) = M * fields_[i].eval(y, t);
  return G;
}

// ---- probes and grids ---------------------------------------------------------------

std::vector<ControlSignal> default_probe_basis(std::size_t k, unsigned max_freq) {
  std::vector<ControlSignal> out;
  for (std::size_t c = 0; c < k; ++c) {
    auto on_channel = [&](QuasiTrigPoly f) {
      std::vector<QuasiTrigPoly> ch(k);
      ch[c] = std::move(f);
      out.emplace_back(std::move(ch));
    };
    on_channel(QuasiTrigPoly::constant(1.0));
    for (unsigned m = 1; m <= max_freq; ++m) {
      on_channel(QuasiTrigPoly::trig(Phase::cos, m));
      on_channel(QuasiTrigPoly::trig(Phase::sin, m));
    }
  }
  return out;
}

std::vector<double> uniform_grid(std::size_t points) {
  if (points < 2) throw ValidationError("time grid needs at least two points");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) g[i] = static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

// ---- first order ---------------------------------------------------------------------

Eigen::VectorXd first_diff(const EndpointProblem& P, const ControlSignal& v) {
  check_signal(P, v);
  const auto n = static_cast<Eigen::Index>(P.dim());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  if (P.exact() && v.closed_form()) {
    const auto& g = P.pullbacks_at_q1();
    for (std::size_t i = 0; i < P.k(); ++i) {
      if (v.qtp(i).is_zero()) continue;
      for (Eigen::Index r = 0; r < n; ++r) {
        const auto& comp = g[i][static_cast<std::size_t>(r)];
        if (!comp.is_zero()) out[r] += (v.qtp(i) * QuasiTrigPoly::from_time_polynomial(comp)).integral(0.0, 1.0);
      }
    }
    return out;
  }
  if (P.exact()) {
    // Piecewise perturbation: quadrature between its breakpoints.
    const auto b = segment_bounds(v.breakpoints());
    for (std::size_t s = 0; s + 1 < b.size(); ++s) {
      for (Eigen::Index r = 0; r < n; ++r) {
        out[r] += GK::integrate(
            [&](double t) {
              double acc = 0.0;
              for (std::size_t i = 0; i < P.k(); ++i) {
                acc += v.channel_value(i, t) * P.pullbacks_at_q1()[i][static_cast<std::size_t>(r)].eval({}, t);
              }
              return acc;
            },
            b[s], b[s + 1], 12, 1e-13);
      }
    }
    return out;
  }
  // Numeric backend: composite Simpson on the tabulated reference, per smooth segment.
  const ReferenceSamples ref = tabulate_reference(P.flow(), P.q1());
  std::vector<double> bps = P.u_ref().breakpoints();
  for (double x : v.breakpoints()) bps.push_back(x);
  std::sort(bps.begin(), bps.end());
  const auto bounds = segment_bounds(bps);
  auto value_at = [&](std::size_t j, double lo, double hi) {
    // One-sided evaluation keeps jumps of piecewise signals out of each segment.
    const double t = std::clamp(ref.times[j], lo + 1e-12, hi - 1e-12);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < P.k(); ++i) {
      const double vi = v.channel_value(i, t);
      if (vi != 0.0) acc += vi * (ref.pushforward[j] * P.fields()[i].eval(ref.gamma[j], ref.times[j]));
    }
    return acc;
  };
  std::size_t j0 = 0;
  for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
    std::size_t j1 = j0;
    while (j1 + 1 < ref.times.size() && ref.times[j1 + 1] <= bounds[s + 1] + 1e-14) ++j1;
    std::size_t j = j0;
    for (; j + 2 <= j1; j += 2) {
      const double h = ref.times[j + 2] - ref.times[j];
      out += h / 6.0 *
             (value_at(j, bounds[s], bounds[s + 1]) + 4.0 * value_at(j + 1, bounds[s], bounds[s + 1]) +
              value_at(j + 2, bounds[s], bounds[s + 1]));
    }
    if (j < j1) {
      out += 0.5 * (ref.times[j1] - ref.times[j]) *
             (value_at(j, bounds[s], bounds[s + 1]) + value_at(j1, bounds[s], bounds[s + 1]));
    }
    j0 = j1;
  }
  return out;
}

CokernelBasis cokernel(const EndpointProblem& P, std::span<const double> grid) {
  if (grid.empty()) throw ValidationError("cokernel: probe grid is empty");
  const auto n = static_cast<Eigen::Index>(P.dim());
  const auto kk = static_cast<Eigen::Index>(P.k());
  Eigen::MatrixXd A(n, kk * static_cast<Eigen::Index>(grid.size()));
  for (std::size_t j = 0; j < grid.size(); ++j) A.middleCols(static_cast<Eigen::Index>(j) * kk, kk) = P.image_vectors(grid[j]);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullU);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cut = P.options().svd_rel_tol * (sv.size() > 0 ? sv[0] : 0.0);
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv[rank] > cut && sv[rank] > 0.0) ++rank;
  CokernelBasis out;
  for (Eigen::Index c = rank; c < n; ++c) {
    Eigen::VectorXd l = svd.matrixU().col(c);
    Eigen::Index big = 0;
    l.cwiseAbs().maxCoeff(&big);
    if (l[big] < 0) l = -l;
    out.lambdas.push_back(std::move(l));
  }
  return out;
}

// ---- second and third order -------------------------------------------------------------

double hessian_scalar(const EndpointProblem& P, const Eigen::VectorXd& lambda, const ControlSignal& v,
                      const ControlSignal& w, IntegrationPath path, bool check) {
  check_signal(P, v);
  check_signal(P, w);
  check_covector(P, lambda);
  if (check) {
    const double tol = P.options().membership_tol;
    const double dv = first_diff(P, v).norm();
    const double dw = first_diff(P, w).norm();
    if (dv > tol || dw > tol) {
      throw ValidationError("hessian_scalar: perturbation not in the kernel (|d0G| = " +
                            format_number(std::max(dv, dw)) + ")");
    }
  }
  const auto& B = P.brackets().second;
  const bool closed = use_closed_form(path, {&v, &w});
  auto kernel = [&](const std::array<std::size_t, 2>& ix) { return pair(lambda, B[ix[1]][ix[0]]); };
  // Slot 0 is s1 (inner field b), slot 1 is s2 (outer field a).
  const double vw = contract<2>(P, closed, kernel, [&](const auto&, std::size_t r) -> const ControlSignal& {
    return r == 0 ? w : v;
  });
  const double wv = contract<2>(P, closed, kernel, [&](const auto&, std::size_t r) -> const ControlSignal& {
    return r == 0 ? v : w;
  });
  return 0.5 * (vw + wv);
}

namespace {

// Simplex integral of <lambda, [g_x^{s3}, [g_y^{s2}, g_z^{s1}]]> (or the reversed nesting).
double third_form(const EndpointProblem& P, const Eigen::VectorXd& lambda, const ControlSignal& x,
                  const ControlSignal& y, const ControlSignal& z, Nesting nesting, bool closed) {
  const auto& T = nesting == Nesting::forward ? P.brackets().third : P.brackets().third_reversed;
  // Index tuple ix is (slot s1, slot s2, slot s3) channel choices.
  if (nesting == Nesting::forward) {
    auto kernel = [&](const std::array<std::size_t, 3>& ix) { return pair(lambda, T[ix[2]][ix[1]][ix[0]]); };
    return contract<3>(P, closed, kernel, [&](const auto&, std::size_t r) -> const ControlSignal& {
      return r == 0 ? z : (r == 1 ? y : x);
    });
  }
  auto kernel = [&](const std::array<std::size_t, 3>& ix) { return pair(lambda, T[ix[0]][ix[1]][ix[2]]); };
  return contract<3>(P, closed, kernel, [&](const auto&, std::size_t r) -> const ControlSignal& {
    return r == 0 ? x : (r == 1 ? y : z);
  });
}

void check_domain(const EndpointProblem& P, const ControlSignal& v, const char* who) {
  const auto res = dom3_residuals(P, P.cokernel().lambdas, v, P.probes());
  const double tol = P.options().membership_tol;
  if (res.first_diff_norm > tol || res.max_pairing > tol) {
    throw ValidationError(std::string(who) + ": perturbation outside the third-order domain (|d0G| = " +
                          format_number(res.first_diff_norm) + ", max pairing = " + format_number(res.max_pairing) +
                          ")");
  }
}

}  // namespace

double third_integral(const EndpointProblem& P, const Eigen::VectorXd& lambda, const ControlSignal& v,
                      Nesting nesting, IntegrationPath path) {
  check_signal(P, v);
  check_covector(P, lambda);
  return third_form(P, lambda, v, v, v, nesting, use_closed_form(path, {&v}));
}

double third_scalar(const EndpointProblem& P, const Eigen::VectorXd& lambda, const ControlSignal& v,
                    IntegrationPath path, bool check) {
  check_signal(P, v);
  check_covector(P, lambda);
  if (check) check_domain(P, v, "third_scalar");
  return 2.0 * third_form(P, lambda, v, v, v, Nesting::forward, use_closed_form(path, {&v}));
}

double trilinear(const EndpointProblem& P, const Eigen::VectorXd& lambda, const ControlSignal& v1,
                 const ControlSignal& v2, const ControlSignal& v3, IntegrationPath path, bool check) {
  for (const auto* v : {&v1, &v2, &v3}) check_signal(P, *v);
  check_covector(P, lambda);
  if (check) {
    for (const auto* v : {&v1, &v2, &v3}) check_domain(P, *v, "trilinear");
  }
  const bool closed = use_closed_form(path, {&v1, &v2, &v3});
  const std::array<const ControlSignal*, 3> a{&v1, &v2, &v3};
  std::array<int, 3> perm{0, 1, 2};
  double total = 0.0;
  do {
    total += third_form(P, lambda, *a[perm[0]], *a[perm[1]], *a[perm[2]], Nesting::forward, closed);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return total / 3.0;
}

DomainResiduals dom3_residuals(const EndpointProblem& P, std::span<const Eigen::VectorXd> lambdas,
                               const ControlSignal& v, std::span<const ControlSignal> probes) {
  DomainResiduals r;
  r.first_diff_norm = first_diff(P, v).norm();
  for (const auto& l : lambdas) {
    for (const auto& x : probes) {
      r.max_pairing = std::max(r.max_pairing, std::abs(hessian_scalar(P, l, v, x, IntegrationPath::automatic, false)));
    }
  }
  return r;
}

bool dom3_membership(const EndpointProblem& P, std::span<const Eigen::VectorXd> lambdas, const ControlSignal& v,
                     std::span<const ControlSignal> probes) {
  const auto r = dom3_residuals(P, lambdas, v, probes);
  const double tol = P.options().membership_tol;
  return r.first_diff_norm <= tol && r.max_pairing <= tol;
}

bool dom3_membership(const EndpointProblem& P, const ControlSignal& v) {
  return dom3_membership(P, P.cokernel().lambdas, v, P.probes());
}

}  // namespace endpt
