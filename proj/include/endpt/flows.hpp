#ifndef ENDPT_FLOWS_HPP
#define ENDPT_FLOWS_HPP

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "endpt/signals.hpp"
#include "endpt/vector_field.hpp"

namespace endpt {

struct FlowOptions {
  double rk_step = 1e-3;
  unsigned picard_max_iter = 16;
  /// Give up on the exact backend once an iterate has more terms than this.
  std::size_t picard_max_terms = 20000;
  /// Throw instead of falling back to the numeric backend.
  bool require_exact = false;
};

/**
 * @brief Drift f_u(x,t) = sum_i u_i(t) f_i(x,t) with cached Jacobian polynomials.
 */
class ControlledDrift {
 public:
  ControlledDrift(std::vector<PolyVectorField> fields, ControlSignal u);

  std::size_t dim() const noexcept { return dim_; }
  const std::vector<PolyVectorField>& fields() const noexcept { return fields_; }
  const ControlSignal& control() const noexcept { return u_; }

  /// The control is read at tu, the fields at t (they differ only at breakpoints).
  Eigen::VectorXd value(const Eigen::VectorXd& x, double t, double tu) const;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, double t, double tu) const;
  Eigen::VectorXd value(const Eigen::VectorXd& x, double t) const { return value(x, t, t); }
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, double t) const { return jacobian(x, t, t); }

 private:
  std::vector<PolyVectorField> fields_;
  ControlSignal u_;
  std::size_t dim_;
  // jac_[i][r][c] = d f_i[r] / d x_c
  std::vector<std::vector<std::vector<Polynomial>>> jac_;
};

/**
 * @brief Flow of the reference drift, exact or numeric.
 *
 * The exact backend stores Phi(y, s, t) = P_s^t(y) as polynomials in the
 * state y, the base time s (extra variable index dim) and t.
 */
class FlowMap {
 public:
  enum class Backend { exact, numeric };

  FlowMap(ControlledDrift drift, std::vector<Polynomial> two_time_map, double t0, unsigned iterations,
          double rk_step);
  FlowMap(ControlledDrift drift, double t0, double rk_step);

  Backend backend() const noexcept { return backend_; }
  std::size_t dim() const noexcept { return drift_.dim(); }
  double base_time() const noexcept { return t0_; }
  double rk_step() const noexcept { return step_; }
  const ControlledDrift& drift() const noexcept { return drift_; }
  unsigned picard_iterations() const noexcept { return iterations_; }

  /// P_from^to(q).
  Eigen::VectorXd transport(const Eigen::VectorXd& q, double from, double to) const;
  Eigen::VectorXd operator()(const Eigen::VectorXd& q, double t) const { return transport(q, t0_, t); }
  /// Derivative of P_from^to in the state, at q.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& q, double from, double to) const;

  // Exact backend only.
  const std::vector<Polynomial>& two_time_map() const;
  /// P_from^t(y) as polynomials in (y, t).
  std::vector<Polynomial> map_from(double from) const;
  /// P_t^to(y) as polynomials in (y, t), t being the base time.
  std::vector<Polynomial> map_to(double to) const;

 private:
  void require_exact(const char* what) const;

  Backend backend_;
  ControlledDrift drift_;
  std::vector<Polynomial> phi_;
  std::vector<std::vector<Polynomial>> dphi_;  // dphi_[k][j] = d phi_k / d y_j
  double t0_;
  unsigned iterations_ = 0;
  double step_;
};

/// Time-dependent covector t -> M(t)^T lambda1, exact (polynomial in t) or sampled.
class AdjointCurve {
 public:
  explicit AdjointCurve(std::vector<Polynomial> exact_components);
  AdjointCurve(std::vector<double> times, std::vector<Eigen::VectorXd> values);

  bool is_exact() const noexcept { return !exact_.empty(); }
  /// Components as polynomials in t (nvars 0); empty when sampled.
  const std::vector<Polynomial>& polynomials() const noexcept { return exact_; }
  Eigen::VectorXd operator()(double t) const;
  AdjointCurve scaled(double c) const;

 private:
  std::vector<Polynomial> exact_;
  std::vector<double> times_;
  std::vector<Eigen::VectorXd> values_;
};

/// Reference trajectory and pushforward M(t) = D P_t^1 (gamma(t)) on the RK nodes.
struct ReferenceSamples {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> gamma;
  std::vector<Eigen::MatrixXd> pushforward;
};

/// Stabilizing Picard iteration; falls back to numeric unless opts.require_exact.
FlowMap picard_flow(const std::vector<PolyVectorField>& fields, const ControlSignal& u, double t0,
                    const FlowOptions& opts = {});
FlowMap numeric_flow(const std::vector<PolyVectorField>& fields, const ControlSignal& u, double t0,
                     const FlowOptions& opts = {});

/// Classical fixed-step RK4 from (t0, q0) to t1; steps never straddle breakpoints of u.
Eigen::VectorXd rk_flow(const std::vector<PolyVectorField>& fields, const ControlSignal& u, double t0,
                        const Eigen::VectorXd& q0, double t1, double step = 1e-3);
Eigen::VectorXd rk_flow(const ControlledDrift& drift, double t0, const Eigen::VectorXd& q0, double t1,
                        double step);
/// RK4 on the state together with its variational equation; returns (x(t1), dx(t1)/dq0).
std::pair<Eigen::VectorXd, Eigen::MatrixXd> rk_variational(const ControlledDrift& drift, double t0,
                                                           const Eigen::VectorXd& q0, double t1,
                                                           double step);

/// (P_t^1)_* at the time-1 point q, i.e. D P_t^1 evaluated at P_1^t(q).
Eigen::MatrixXd pushforward_matrix(const FlowMap& flow, const Eigen::VectorXd& q, double t);

/// g_i^t = (P_t^1)_* f_i as a field in (x, t); exact backend only.
PolyVectorField pullback_field(const FlowMap& flow, std::size_t i);

/// lambda(t) = (P_t^1)^* lambda1 along the trajectory ending at q1.
AdjointCurve adjoint_curve(const FlowMap& flow, const Eigen::VectorXd& q1, const Eigen::VectorXd& lambda1);

/// Backward tabulation from (1, q1); nodes include 0, 1 and all breakpoints.
ReferenceSamples tabulate_reference(const FlowMap& flow, const Eigen::VectorXd& q1);

/// Substitutes a numeric point into polynomial maps, leaving polynomials in t (nvars 0).
std::vector<Polynomial> at_point(const std::vector<Polynomial>& map, const Eigen::VectorXd& q);

}  // namespace endpt

#endif  // ENDPT_FLOWS_HPP
