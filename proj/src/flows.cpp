#include "endpt/flows.hpp"

#include <algorithm>
#include <cmath>

#include "endpt/errors.hpp"

namespace endpt {

namespace {

struct Segment {
  double a;
  double b;
  int steps;
};

// Splits [t0,t1] (either orientation) at breakpoints into equal-step runs.
std::vector<Segment> segments(double t0, double t1, const std::vector<double>& bps, double step) {
  if (!(step > 0)) throw ValidationError("RK step must be positive");
  std::vector<double> cuts{t0};
  const double lo = std::min(t0, t1);
  const double hi = std::max(t0, t1);
  std::vector<double> inner;
  for (double b : bps) {
    if (b > lo && b < hi) inner.push_back(b);
  }
  if (t1 < t0) std::reverse(inner.begin(), inner.end());
  cuts.insert(cuts.end(), inner.begin(), inner.end());
  cuts.push_back(t1);
  std::vector<Segment> out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double len = std::abs(cuts[i + 1] - cuts[i]);
    if (len == 0.0) continue;
    const int n = std::max(1, static_cast<int>(std::ceil(len / step - 1e-9)));
    out.push_back({cuts[i], cuts[i + 1], n});
  }
  return out;
}

// Control time kept strictly inside the segment so piecewise signals read the right piece.
double control_time(double t, const Segment& s) {
  const double eta = 1e-12 * std::abs(s.b - s.a);
  const double lo = std::min(s.a, s.b) + eta;
  const double hi = std::max(s.a, s.b) - eta;
  return std::clamp(t, lo, hi);
}

void check_finite(const Eigen::VectorXd& x) {
  if (!x.allFinite()) throw NumericError("non-finite state encountered during integration");
}

}  // namespace

// ---- drift -----------------------------------------------------------------------

ControlledDrift::ControlledDrift(std::vector<PolyVectorField> fields, ControlSignal u)
    : fields_(std::move(fields)), u_(std::move(u)), dim_(fields_.empty() ? 0 : fields_.front().dim()) {
  if (fields_.size() != u_.k()) {
    throw ValidationError("control has " + std::to_string(u_.k()) + " channels for " +
                          std::to_string(fields_.size()) + " fields");
  }
  for (const auto& f : fields_) {
    if (f.dim() != dim_ || f.nvars() != dim_) throw ValidationError("control fields disagree on dimension");
  }
  jac_.resize(fields_.size());
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    jac_[i].assign(dim_, std::vector<Polynomial>(dim_));
    for (std::size_t r = 0; r < dim_; ++r) {
      for (std::size_t c = 0; c < dim_; ++c) jac_[i][r][c] = fields_[i][r].partial(c);
    }
  }
}

Eigen::VectorXd ControlledDrift::value(const Eigen::VectorXd& x, double t, double tu) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
  std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    const double ui = u_.channel_value(i, tu);
    if (ui == 0.0) continue;
    for (std::size_t r = 0; r < dim_; ++r) out[static_cast<Eigen::Index>(r)] += ui * fields_[i][r].eval(xs, t);
  }
  return out;
}

Eigen::MatrixXd ControlledDrift::jacobian(const Eigen::VectorXd& x, double t, double tu) const {
  const auto n = static_cast<Eigen::Index>(dim_);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    const double ui = u_.channel_value(i, tu);
    if (ui == 0.0) continue;
    for (std::size_t r = 0; r < dim_; ++r) {
      for (std::size_t c = 0; c < dim_; ++c) {
        A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) += ui * jac_[i][r][c].eval(xs, t);
      }
    }
  }
  return A;
}

// ---- RK4 -----------------------------------------------------------------------

namespace {

// Drift with the control read at a separate (segment-clamped) time.
struct SegmentDrift {
  const ControlledDrift& d;
  const Segment& seg;

  Eigen::VectorXd f(const Eigen::VectorXd& x, double t) const { return d.value(x, t, control_time(t, seg)); }
  Eigen::MatrixXd A(const Eigen::VectorXd& x, double t) const { return d.jacobian(x, t, control_time(t, seg)); }
};

}  // namespace

Eigen::VectorXd rk_flow(const ControlledDrift& drift, double t0, const Eigen::VectorXd& q0, double t1,
                        double step) {
  Eigen::VectorXd x = q0;
  for (const Segment& s : segments(t0, t1, drift.control().breakpoints(), step)) {
    const SegmentDrift sd{drift, s};
    const double h = (s.b - s.a) / s.steps;
    for (int n = 0; n < s.steps; ++n) {
      const double t = s.a + n * h;
      const Eigen::VectorXd k1 = sd.f(x, t);
      const Eigen::VectorXd k2 = sd.f(x + 0.5 * h * k1, t + 0.5 * h);
      const Eigen::VectorXd k3 = sd.f(x + 0.5 * h * k2, t + 0.5 * h);
      const Eigen::VectorXd k4 = sd.f(x + h * k3, t + h);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    check_finite(x);
  }
  return x;
}

Eigen::VectorXd rk_flow(const std::vector<PolyVectorField>& fields, const ControlSignal& u, double t0,
                        const Eigen::VectorXd& q0, double t1, double step) {
  return rk_flow(ControlledDrift(fields, u), t0, q0, t1, step);
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> rk_variational(const ControlledDrift& drift, double t0,
                                                           const Eigen::VectorXd& q0, double t1,
                                                           double step) {
  Eigen::VectorXd x = q0;
  Eigen::MatrixXd J = Eigen::MatrixXd::Identity(q0.size(), q0.size());
  for (const Segment& s : segments(t0, t1, drift.control().breakpoints(), step)) {
    const SegmentDrift sd{drift, s};
    const double h = (s.b - s.a) / s.steps;
    for (int n = 0; n < s.steps; ++n) {
      const double t = s.a + n * h;
      const Eigen::VectorXd k1 = sd.f(x, t);
      const Eigen::MatrixXd K1 = sd.A(x, t) * J;
      const Eigen::VectorXd y2 = x + 0.5 * h * k1;
      const Eigen::VectorXd k2 = sd.f(y2, t + 0.5 * h);
      const Eigen::MatrixXd K2 = sd.A(y2, t + 0.5 * h) * (J + 0.5 * h * K1);
      const Eigen::VectorXd y3 = x + 0.5 * h * k2;
      const Eigen::VectorXd k3 = sd.f(y3, t + 0.5 * h);
      const Eigen::MatrixXd K3 = sd.A(y3, t + 0.5 * h) * (J + 0.5 * h * K2);
      const Eigen::VectorXd y4 = x + h * k3;
      const Eigen::VectorXd k4 = sd.f(y4, t + h);
      const Eigen::MatrixXd K4 = sd.A(y4, t + h) * (J + h * K3);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      J += (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
    }
    check_finite(x);
  }
  return {x, J};
}

// ---- FlowMap --------------------------------------------------------------------

FlowMap::FlowMap(ControlledDrift drift, std::vector<Polynomial> two_time_map, double t0, unsigned iterations,
                 double rk_step)
    : backend_(Backend::exact),
      drift_(std::move(drift)),
      phi_(std::move(two_time_map)),
      t0_(t0),
      iterations_(iterations),
      step_(rk_step) {
  const std::size_t n = drift_.dim();
  dphi_.assign(n, std::vector<Polynomial>(n));
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < n; ++j) dphi_[k][j] = phi_[k].partial(j);
  }
}

FlowMap::FlowMap(ControlledDrift drift, double t0, double rk_step)
    : backend_(Backend::numeric), drift_(std::move(drift)), t0_(t0), step_(rk_step) {}

void FlowMap::require_exact(const char* what) const {
  if (backend_ != Backend::exact) throw ValidationError(std::string(what) + " requires the exact flow backend");
}

const std::vector<Polynomial>& FlowMap::two_time_map() const {
  require_exact("two_time_map");
  return phi_;
}

Eigen::VectorXd FlowMap::transport(const Eigen::VectorXd& q, double from, double to) const {
  if (static_cast<std::size_t>(q.size()) != dim()) throw ValidationError("transport: point dimension mismatch");
  if (backend_ == Backend::numeric) return rk_flow(drift_, from, q, to, step_);
  std::vector<double> ys(q.data(), q.data() + q.size());
  ys.push_back(from);
  Eigen::VectorXd out(q.size());
  for (std::size_t k = 0; k < dim(); ++k) out[static_cast<Eigen::Index>(k)] = phi_[k].eval(ys, to);
  return out;
}

Eigen::MatrixXd FlowMap::jacobian(const Eigen::VectorXd& q, double from, double to) const {
  if (backend_ == Backend::numeric) return rk_variational(drift_, from, q, to, step_).second;
  std::vector<double> ys(q.data(), q.data() + q.size());
  ys.push_back(from);
  const auto n = static_cast<Eigen::Index>(dim());
  Eigen::MatrixXd J(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index j = 0; j < n; ++j) {
      J(k, j) = dphi_[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)].eval(ys, to);
    }
  }
  return J;
}

std::vector<Polynomial> FlowMap::map_from(double from) const {
  require_exact("map_from");
  const std::size_t n = dim();
  std::vector<Polynomial> subs;
  for (std::size_t i = 0; i < n; ++i) subs.push_back(Polynomial::variable(n, i));
  subs.push_back(Polynomial::constant(n, from));
  std::vector<Polynomial> out;
  for (const auto& p : phi_) out.push_back(p.compose(subs, Polynomial::time(n)));
  return out;
}

std::vector<Polynomial> FlowMap::map_to(double to) const {
  require_exact("map_to");
  const std::size_t n = dim();
  std::vector<Polynomial> subs;
  for (std::size_t i = 0; i < n; ++i) subs.push_back(Polynomial::variable(n, i));
  subs.push_back(Polynomial::time(n));
  std::vector<Polynomial> out;
  for (const auto& p : phi_) out.push_back(p.compose(subs, Polynomial::constant(n, to)));
  return out;
}

// ---- construction -------------------------------------------------------------------

FlowMap numeric_flow(const std::vector<PolyVectorField>& fields, const ControlSignal& u, double t0,
                     const FlowOptions& opts) {
  return FlowMap(ControlledDrift(fields, u), t0, opts.rk_step);
}

FlowMap picard_flow(const std::vector<PolyVectorField>& fields, const ControlSignal& u, double t0,
                    const FlowOptions& opts) {
  ControlledDrift drift(fields, u);
  auto fallback = [&](const std::string& why) {
    if (opts.require_exact) throw ValidationError("exact flow unavailable: " + why);
    return FlowMap(std::move(drift), t0, opts.rk_step);
  };
  if (!u.polynomial()) return fallback("non-polynomial control channel");

  const std::size_t n = drift.dim();
  const std::size_t m = n + 1;  // y_1..y_n and the base time s
  std::vector<Polynomial> ids;
  for (std::size_t i = 0; i < m; ++i) ids.push_back(Polynomial::variable(m, i));
  const Polynomial s = ids[n];
  const Polynomial tt = Polynomial::time(m);
  std::vector<Polynomial> uis;
  for (std::size_t i = 0; i < u.k(); ++i) uis.push_back(u.qtp(i).to_polynomial(m));

  std::vector<Polynomial> x(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n));
  for (unsigned iter = 1; iter <= opts.picard_max_iter; ++iter) {
    std::vector<Polynomial> next;
    std::size_t term_count = 0;
    bool same = true;
    for (std::size_t k = 0; k < n; ++k) {
      Polynomial integrand(m);
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (uis[i].is_zero()) continue;
        integrand += uis[i] * fields[i][k].compose(x, tt);
      }
      const Polynomial A = integrand.antiderivative_time();
      Polynomial nk = ids[k] + A - A.compose(ids, s);
      same = same && nk.approx_equal(x[k], 1e-13);
      term_count += nk.terms().size();
      next.push_back(std::move(nk));
    }
    if (same) return FlowMap(std::move(drift), std::move(next), t0, iter, opts.rk_step);
    if (term_count > opts.picard_max_terms) return fallback("Picard iterate grew past the term limit");
    x = std::move(next);
  }
  return fallback("Picard iteration did not stabilize");
}

// ---- pushforward, pullback, adjoint ----------------------------------------------------

std::vector<Polynomial> at_point(const std::vector<Polynomial>& map, const Eigen::VectorXd& q) {
  std::vector<Polynomial> subs;
  for (Eigen::Index i = 0; i < q.size(); ++i) subs.push_back(Polynomial::constant(0, q[i]));
  std::vector<Polynomial> out;
  for (const auto& p : map) out.push_back(p.compose(subs, Polynomial::time(0)));
  return out;
}

Eigen::MatrixXd pushforward_matrix(const FlowMap& flow, const Eigen::VectorXd& q, double t) {
  const Eigen::VectorXd y = flow.transport(q, 1.0, t);
  return flow.jacobian(y, t, 1.0);
}

PolyVectorField pullback_field(const FlowMap& flow, std::size_t i) {
  if (flow.backend() != FlowMap::Backend::exact) {
    throw ValidationError("symbolic pullback requested on the numeric flow backend");
  }
  const auto& fields = flow.drift().fields();
  if (i >= fields.size()) throw ValidationError("pullback_field: field index out of range");
  const std::size_t n = flow.dim();
  const std::vector<Polynomial> to1 = flow.map_to(1.0);
  const std::vector<Polynomial> from1 = flow.map_from(1.0);
  std::vector<Polynomial> g;
  for (std::size_t k = 0; k < n; ++k) {
    Polynomial h(n);
    for (std::size_t j = 0; j < n; ++j) {
      if (fields[i][j].is_zero()) continue;
      h += to1[k].partial(j) * fields[i][j];
    }
    g.push_back(h.compose(from1, Polynomial::time(n)));
  }
  return PolyVectorField(std::move(g));
}

ReferenceSamples tabulate_reference(const FlowMap& flow, const Eigen::VectorXd& q1) {
  const ControlledDrift& d = flow.drift();
  const auto n = static_cast<Eigen::Index>(flow.dim());
  ReferenceSamples out;
  Eigen::VectorXd x = q1;
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
  out.times.push_back(1.0);
  out.gamma.push_back(x);
  out.pushforward.push_back(M);
  // Backward in time: gamma' = f, M' = -M A.
  for (const Segment& s : segments(1.0, 0.0, d.control().breakpoints(), flow.rk_step())) {
    const SegmentDrift sd{d, s};
    const double h = (s.b - s.a) / s.steps;
    for (int k = 0; k < s.steps; ++k) {
      const double t = s.a + k * h;
      const Eigen::VectorXd k1 = sd.f(x, t);
      const Eigen::MatrixXd K1 = -M * sd.A(x, t);
      const Eigen::VectorXd y2 = x + 0.5 * h * k1;
      const Eigen::MatrixXd M2 = M + 0.5 * h * K1;
      const Eigen::VectorXd k2 = sd.f(y2, t + 0.5 * h);
      const Eigen::MatrixXd K2 = -M2 * sd.A(y2, t + 0.5 * h);
      const Eigen::VectorXd y3 = x + 0.5 * h * k2;
      const Eigen::MatrixXd M3 = M + 0.5 * h * K2;
      const Eigen::VectorXd k3 = sd.f(y3, t + 0.5 * h);
      const Eigen::MatrixXd K3 = -M3 * sd.A(y3, t + 0.5 * h);
      const Eigen::VectorXd y4 = x + h * k3;
      const Eigen::MatrixXd M4 = M + h * K3;
      const Eigen::VectorXd k4 = sd.f(y4, t + h);
      const Eigen::MatrixXd K4 = -M4 * sd.A(y4, t + h);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      M += (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
      out.times.push_back(k + 1 == s.steps ? s.b : t + h);
      out.gamma.push_back(x);
      out.pushforward.push_back(M);
    }
    check_finite(x);
  }
  std::reverse(out.times.begin(), out.times.end());
  std::reverse(out.gamma.begin(), out.gamma.end());
  std::reverse(out.pushforward.begin(), out.pushforward.end());
  return out;
}

AdjointCurve adjoint_curve(const FlowMap& flow, const Eigen::VectorXd& q1, const Eigen::VectorXd& lambda1) {
  const std::size_t n = flow.dim();
  if (static_cast<std::size_t>(lambda1.size()) != n) throw ValidationError("adjoint_curve: covector dimension mismatch");
  if (flow.backend() == FlowMap::Backend::exact) {
    const std::vector<Polynomial> to1 = flow.map_to(1.0);
    const std::vector<Polynomial> gamma = at_point(flow.map_from(1.0), q1);
    std::vector<Polynomial> lam(n, Polynomial(0));
    for (std::size_t k = 0; k < n; ++k) {
      if (lambda1[static_cast<Eigen::Index>(k)] == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        lam[j] += lambda1[static_cast<Eigen::Index>(k)] * to1[k].partial(j).compose(gamma, Polynomial::time(0));
      }
    }
    return AdjointCurve(std::move(lam));
  }
  ReferenceSamples ref = tabulate_reference(flow, q1);
  std::vector<Eigen::VectorXd> vals;
  vals.reserve(ref.times.size());
  for (const auto& M : ref.pushforward) vals.emplace_back(M.transpose() * lambda1);
  return AdjointCurve(std::move(ref.times), std::move(vals));
}

// ---- AdjointCurve ---------------------------------------------------------------------

AdjointCurve::AdjointCurve(std::vector<Polynomial> exact_components) : exact_(std::move(exact_components)) {
  if (exact_.empty()) throw ValidationError("adjoint curve needs at least one component");
}

AdjointCurve::AdjointCurve(std::vector<double> times, std::vector<Eigen::VectorXd> values)
    : times_(std::move(times)), values_(std::move(values)) {
  if (times_.empty() || times_.size() != values_.size()) throw ValidationError("adjoint curve samples malformed");
}

Eigen::VectorXd AdjointCurve::operator()(double t) const {
  if (is_exact()) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(exact_.size()));
    for (std::size_t i = 0; i < exact_.size(); ++i) v[static_cast<Eigen::Index>(i)] = exact_[i].eval({}, t);
    return v;
  }
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return values_.front();
  if (it == times_.end()) return values_.back();
  const auto j = static_cast<std::size_t>(it - times_.begin());
  if (*it == t) return values_[j];
  const double w = (t - times_[j - 1]) / (times_[j] - times_[j - 1]);
  return (1.0 - w) * values_[j - 1] + w * values_[j];
}

AdjointCurve AdjointCurve::scaled(double c) const {
  if (is_exact()) {
    std::vector<Polynomial> p;
    for (const auto& x : exact_) p.push_back(c * x);
    return AdjointCurve(std::move(p));
  }
  std::vector<Eigen::VectorXd> v;
  for (const auto& x : values_) v.emplace_back(c * x);
  return AdjointCurve(times_, std::move(v));
}

}  // namespace endpt
