#ifndef ENDPT_ENDPOINT_HPP
#define ENDPT_ENDPOINT_HPP

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

#include "endpt/flows.hpp"
#include "endpt/signals.hpp"
#include "endpt/vector_field.hpp"

namespace endpt {

struct EndpointOptions {
  /// Singular values below this times the largest one count as zero.
  double svd_rel_tol = 1e-9;
  /// Kernel and domain membership tolerance.
  double membership_tol = 1e-8;
  unsigned probe_max_freq = 8;
  std::size_t grid_points = 101;
  FlowOptions flow{};
};

/// Orthonormal rows spanning the annihilator of the sampled image.
struct CokernelBasis {
  std::vector<Eigen::VectorXd> lambdas;
  std::size_t corank() const noexcept { return lambdas.size(); }
};

/// Scalar polynomial tables of brackets at q1, one slot per simplex time.
struct BracketTables {
  // second[a][b][r] = [g_a^{s2}, g_b^{s1}](q1)_r, variables (s1, s2)
  std::vector<std::vector<std::vector<Polynomial>>> second;
  // third[a][b][c][r] = [g_a^{s3}, [g_b^{s2}, g_c^{s1}]](q1)_r, variables (s1, s2, s3)
  std::vector<std::vector<std::vector<std::vector<Polynomial>>>> third;
  // Reversed nesting [g_a^{s1}, [g_b^{s2}, g_c^{s3}]](q1)_r.
  std::vector<std::vector<std::vector<std::vector<Polynomial>>>> third_reversed;
};

/**
 * @brief End-point map of a control-affine polynomial system at a reference control.
 *
 * Builds the reference flow once. With the exact backend the pullback fields and
 * the bracket tables are kept as polynomials; otherwise only the first-order
 * quantities are available.
 */
class EndpointProblem {
 public:
  EndpointProblem(std::vector<PolyVectorField> fields, ControlSignal u_ref, Eigen::VectorXd q0,
                  EndpointOptions opts = {});

  std::size_t dim() const noexcept { return fields_.front().dim(); }
  std::size_t k() const noexcept { return fields_.size(); }
  const std::vector<PolyVectorField>& fields() const noexcept { return fields_; }
  const ControlSignal& u_ref() const noexcept { return u_; }
  const Eigen::VectorXd& q0() const noexcept { return q0_; }
  const Eigen::VectorXd& q1() const noexcept { return q1_; }
  const FlowMap& flow() const noexcept { return flow_; }
  const EndpointOptions& options() const noexcept { return opts_; }
  bool exact() const noexcept { return flow_.backend() == FlowMap::Backend::exact; }

  /// g_i^t as fields in (x, t); exact backend only.
  const std::vector<PolyVectorField>& pullbacks() const;
  /// g_i^t(q1) as polynomials in t; exact backend only.
  const std::vector<std::vector<Polynomial>>& pullbacks_at_q1() const;
  const BracketTables& brackets() const;
  /// Columns g_i^t(q1), i = 1..k.
  Eigen::MatrixXd image_vectors(double t) const;
  /// Reference trajectory gamma(t) = P_0^t(q0).
  Eigen::VectorXd gamma(double t) const { return flow_.transport(q0_, flow_.base_time(), t); }
  /// Cokernel on the default uniform grid.
  const CokernelBasis& cokernel() const noexcept { return coker_; }
  /// Constants and cos/sin up to probe_max_freq on each channel.
  const std::vector<ControlSignal>& probes() const noexcept { return probes_; }

 private:
  void require_exact(const char* what) const;

  std::vector<PolyVectorField> fields_;
  ControlSignal u_;
  Eigen::VectorXd q0_;
  EndpointOptions opts_;
  FlowMap flow_;
  Eigen::VectorXd q1_;
  std::vector<PolyVectorField> pullbacks_;
  std::vector<std::vector<Polynomial>> pullbacks_q1_;
  BracketTables brackets_;
  CokernelBasis coker_;
  std::vector<ControlSignal> probes_;
};

enum class IntegrationPath { automatic, closed_form, quadrature };
enum class Nesting { forward, reversed };

struct SimplexResult {
  double value = 0.0;
  double error_estimate = 0.0;
};

/// Nested adaptive Gauss-Kronrod over {0 <= s_d <= ... <= s_1 <= 1}, d in 1..3.
SimplexResult simplex_integrate(const std::function<double(std::span<const double>)>& integrand, int d,
                                double tol = 1e-12);

/**
 * Exact value of the simplex integral of kernel(s_1..s_d) * prod_r signals[r-1](s_r).
 * kernel has nvars d with variable r-1 standing for s_r.
 */
double simplex_closed_form(const Polynomial& kernel, std::span<const QuasiTrigPoly> signals);

std::vector<ControlSignal> default_probe_basis(std::size_t k, unsigned max_freq);
std::vector<double> uniform_grid(std::size_t points);

Eigen::VectorXd first_diff(const EndpointProblem& P, const ControlSignal& v);
CokernelBasis cokernel(const EndpointProblem& P, std::span<const double> grid);

/// Polarized lambda-Hessian; v and w must lie in the kernel unless check is false.
double hessian_scalar(const EndpointProblem& P, const Eigen::VectorXd& lambda, const ControlSignal& v,
                      const ControlSignal& w, IntegrationPath path = IntegrationPath::automatic,
                      bool check = true);

/// Simplex integral of <lambda, triple bracket> without the leading factor 2.
double third_integral(const EndpointProblem& P, const Eigen::VectorXd& lambda, const ControlSignal& v,
                      Nesting nesting = Nesting::forward, IntegrationPath path = IntegrationPath::automatic);

/// lambda D^3 at v; v must lie in the third-order domain unless check is false.
double third_scalar(const EndpointProblem& P, const Eigen::VectorXd& lambda, const ControlSignal& v,
                    IntegrationPath path = IntegrationPath::automatic, bool check = true);

/// Symmetric trilinear form with trilinear(v, v, v) == third_scalar(v).
double trilinear(const EndpointProblem& P, const Eigen::VectorXd& lambda, const ControlSignal& v1,
                 const ControlSignal& v2, const ControlSignal& v3,
                 IntegrationPath path = IntegrationPath::automatic, bool check = true);

struct DomainResiduals {
  double first_diff_norm = 0.0;
  double max_pairing = 0.0;
};
DomainResiduals dom3_residuals(const EndpointProblem& P, std::span<const Eigen::VectorXd> lambdas,
                               const ControlSignal& v, std::span<const ControlSignal> probes);
bool dom3_membership(const EndpointProblem& P, std::span<const Eigen::VectorXd> lambdas, const ControlSignal& v,
                     std::span<const ControlSignal> probes);
bool dom3_membership(const EndpointProblem& P, const ControlSignal& v);

}  // namespace endpt

#endif  // ENDPT_ENDPOINT_HPP
