#ifndef ENDPT_CONDITIONS_HPP
#define ENDPT_CONDITIONS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "endpt/endpoint.hpp"
#include "endpt/flows.hpp"

namespace endpt {

struct Witness {
  double time = 0.0;
  std::vector<std::size_t> indices;  // zero-based field indices
};

struct ConditionVerdict {
  std::string name;
  bool holds = true;
  double max_violation = 0.0;
  double tolerance = 1e-8;
  /// True when the pairing was a polynomial identity evaluated exactly.
  bool symbolic = false;
  std::optional<Witness> witness;
  std::vector<std::string> notes;
};

/// Adjoint curve lambda(t) = (P_t^1)^* lambda1 normalized to |lambda(1)| = 1.
AdjointCurve normalized_adjoint(const EndpointProblem& P, const Eigen::VectorXd& lambda1);

ConditionVerdict pmp_check(const EndpointProblem& P, const AdjointCurve& lambda, std::span<const double> grid,
                           double tol = 1e-8);
ConditionVerdict goh_check(const EndpointProblem& P, const AdjointCurve& lambda, std::span<const double> grid,
                           double tol = 1e-8);
/// <lambda,[f_i,[f_j,f_l]]> + <lambda,[f_l,[f_j,f_i]]> over all (i, j, l).
ConditionVerdict third_order_condition(const EndpointProblem& P, const AdjointCurve& lambda,
                                       std::span<const double> grid, double tol = 1e-8);

enum class Singularity { regular, singular, strictly_singular };
const char* to_string(Singularity s);

struct SingularityReport {
  Singularity kind = Singularity::regular;
  /// False when the extended differential is onto on the probe span.
  bool critical = false;
  std::size_t extended_corank = 0;
  bool has_normal = false;    // some annihilator with lambda_0 != 0
  bool has_abnormal = false;  // some nonzero annihilator with lambda_0 == 0
  /// Annihilators (lambda, lambda_0) of the extended differential.
  std::vector<Eigen::VectorXd> annihilators;
};

/// Classifies u_ref through the extended (end-point, length) differential on the probe basis.
SingularityReport singularity_classify(const EndpointProblem& P, std::span<const ControlSignal> probes);
SingularityReport singularity_classify(const EndpointProblem& P);

/// Arc-length horizontal curve of the example system on [0, tau], (u1, u2) sampled uniformly.
struct SampledCurve {
  std::vector<double> times;
  std::vector<Eigen::Vector2d> controls;
};

/// Checks int u2 (1 - eta1) <= tau along the sampled curve; slack in the notes and max_violation.
ConditionVerdict calibration_inequality(unsigned p_even, const SampledCurve& eta, double precondition_tol = 1e-6);

struct CalibrationResult {
  ConditionVerdict verdict;
  double lhs = 0.0;
  double slack = 0.0;
};
CalibrationResult calibration_evaluate(unsigned p_even, const SampledCurve& eta, double precondition_tol = 1e-6);

/// Random admissible curve: zero-mean trig u1, u2 = +-sqrt(1 - u1^2) with a sign flip solved for the
/// constraint int u2 eta1^p = 0. Returns nullopt if the random draw admits no such flip.
std::optional<SampledCurve> random_admissible_curve(unsigned p_even, double tau, std::uint64_t seed,
                                                    std::size_t samples = 4001);

}  // namespace endpt

#endif  // ENDPT_CONDITIONS_HPP
