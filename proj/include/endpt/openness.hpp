#ifndef ENDPT_OPENNESS_HPP
#define ENDPT_OPENNESS_HPP

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "endpt/endpoint.hpp"

namespace endpt {

enum class Precision { extended, quad };  // long double, __float128

struct EvaluatorOptions {
  std::size_t steps = 200;
  unsigned stages = 6;
};

/**
 * @brief End-point deviation w -> F(u_ref + w) - F(u_ref) on the span of a fixed basis.
 *
 * Gauss-Legendre collocation in long double or __float128; the reference end
 * point is integrated with the same scheme so the difference carries no bias.
 */
class EndpointEvaluator {
 public:
  EndpointEvaluator(const EndpointProblem& P, std::vector<ControlSignal> basis, EvaluatorOptions opts = {});
  ~EndpointEvaluator();
  EndpointEvaluator(EndpointEvaluator&&) noexcept;
  EndpointEvaluator& operator=(EndpointEvaluator&&) noexcept;

  std::size_t basis_size() const noexcept { return basis_.size(); }
  const std::vector<ControlSignal>& basis() const noexcept { return basis_; }

  /// Deviation at basis coefficients a.
  Eigen::VectorXd deviation(const Eigen::VectorXd& a, Precision p = Precision::extended) const;
  /// c[j] = d^jF(w, ..., w) / j! for w = sum a_i basis_i, j = 0..order (order <= 3); c[0] = 0.
  std::vector<Eigen::VectorXd> taylor(const Eigen::VectorXd& a, unsigned order) const;

 private:
  struct Impl;
  std::vector<ControlSignal> basis_;
  std::unique_ptr<Impl> impl_;
};

/// k!/(prod h_i!) times (distinct orderings)/r!: the integer in front of
/// F^{(r)}[phi^{(h_1)}, ..., phi^{(h_r)}] in the k-th derivative of F(phi(eps)), k = sum h_i.
unsigned long long taylor_constant(std::span<const unsigned> orders);

enum class FamilyKind { corank1, general };
const char* to_string(FamilyKind k);

/// One summand eps^power / power! * prod params[i] * (coef . basis).
struct FamilyTerm {
  unsigned power = 0;
  std::vector<std::size_t> params;
  Eigen::VectorXd coef;
};

struct PerturbationFamily {
  FamilyKind kind = FamilyKind::corank1;
  double epsilon = 0.3;
  std::vector<ControlSignal> basis;
  std::vector<FamilyTerm> terms;
  /// Parameter p enters as sign(p)|p|^(1/roots[i]).
  std::vector<unsigned> roots;
  /// Leading order K: Phi_eps(p) = eps^K * leading * p + higher order, with roots undone.
  unsigned order = 9;
  Eigen::MatrixXd leading;
  /// Solved auxiliary vectors (basis coefficients) and derived quantities.
  std::map<std::string, Eigen::VectorXd> vectors;
  std::map<std::string, double> residuals;
  std::vector<std::string> notes;
  bool surjective = true;

  std::size_t param_dim() const noexcept { return roots.size(); }
  /// Basis coefficients of phi_eps at the raw parameters.
  Eigen::VectorXd controls(const Eigen::VectorXd& params, double eps) const;
  /// Raw parameters whose rooted values equal p.
  Eigen::VectorXd unroot(const Eigen::VectorXd& p) const;
};

struct FamilyOptions {
  EvaluatorOptions evaluator{};
  double residual_tol = 1e-8;
  double epsilon = 0.3;
};

/// Corank-one family phi(x, y) = e^3y^3/3! v + e^6y^6/6! z0 + e^9y^9/9! z1 + e^9/9! x.
PerturbationFamily build_corank1_family(const EndpointProblem& P, const Eigen::VectorXd& lambda,
                                        const ControlSignal& v, const FamilyOptions& opts = {});

/// Family phi(r, s, t) built around an isotropic w0 and a candidate zero v0.
PerturbationFamily build_general_family(const EndpointProblem& P, std::span<const Eigen::VectorXd> lambdas,
                                        const ControlSignal& w0, const ControlSignal& v0,
                                        const FamilyOptions& opts = {});

struct BallCoverOptions {
  double delta = 1e-3;
  /// Overrides the family's epsilon when positive.
  double epsilon = 0.0;
  std::size_t samples = 125;
  double tol = 1e-6;
  std::size_t max_iter = 200;
  Precision precision = Precision::extended;
};

struct TargetResult {
  Eigen::VectorXd target;
  Eigen::VectorXd solution;
  std::size_t iterations = 0;
  double residual = 0.0;
  bool reached = false;
  bool diverged = false;
};

struct CoverageResult {
  double fraction = 0.0;
  std::size_t reached = 0;
  std::vector<TargetResult> targets;
  /// True only when every target is reached; partial coverage carries no verdict.
  bool certified = false;
  double epsilon = 0.0;
  double delta = 0.0;
  double tol = 0.0;
  /// max |solution| / delta over reached targets.
  double max_radius_ratio = 0.0;
  std::vector<std::string> notes;
};

/// Fixed-point iteration chi(p) = xi + p - Psi_hat(p) for targets xi on a lattice in B_{delta/2}.
CoverageResult ball_cover_verify(const PerturbationFamily& family, const EndpointEvaluator& F,
                                 const BallCoverOptions& opts = {});

/// Targets: cube lattice mapped radially onto the ball of the given radius.
std::vector<Eigen::VectorXd> ball_targets(std::size_t dim, std::size_t samples, double radius);

struct ExpansionCheck {
  std::vector<double> eps;
  std::vector<double> remainder;  // |Phi_eps(p) - eps^K leading p|
  double slope = 0.0;             // least-squares log-log slope
};

/// Remainder of the leading-order expansion along eps at raw parameters p (quad precision).
ExpansionCheck expansion_check(const PerturbationFamily& family, const EndpointEvaluator& F,
                               const Eigen::VectorXd& params, std::span<const double> eps);

std::string coverage_csv(const CoverageResult& r);

struct OpennessOptions {
  FamilyOptions family{};
  BallCoverOptions cover{};
  std::vector<double> slope_eps{0.4, 0.2, 0.1, 0.05};
  double slope_min = 9.5;
};

struct OpennessVerdict {
  bool certified = false;
  std::string reason;
  std::optional<PerturbationFamily> family;
  std::optional<CoverageResult> coverage;
  std::optional<ExpansionCheck> expansion;
};

/// Corank-one pipeline; construction failures become a not-certified verdict with the reason.
OpennessVerdict openness_corank1(const EndpointProblem& P, const Eigen::VectorXd& lambda, const ControlSignal& v,
                                 const OpennessOptions& opts = {});

/// General pipeline. The cover always runs in quad precision (eps^19 leaves no room for
/// long double noise) and the slope threshold is order + 0.5 instead of slope_min.
OpennessVerdict openness_general(const EndpointProblem& P, std::span<const Eigen::VectorXd> lambdas,
                                 const ControlSignal& w0, const ControlSignal& v0, const OpennessOptions& opts = {});

}  // namespace endpt

#endif  // ENDPT_OPENNESS_HPP
