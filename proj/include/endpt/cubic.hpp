#ifndef ENDPT_CUBIC_HPP
#define ENDPT_CUBIC_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "endpt/endpoint.hpp"

namespace endpt {

/**
 * @brief Vector-valued symmetric trilinear map T: R^N x R^N x R^N -> R^n.
 *
 * P(x) = T(x, x, x) is the associated cubic map. Writes through set() keep
 * every permutation of (i, j, k) equal.
 */
class SymmetricTrilinear {
 public:
  SymmetricTrilinear(std::size_t n, std::size_t N);

  /// Symmetrizes raw entries raw[a][i][j][k] by averaging over the six permutations.
  static SymmetricTrilinear symmetrized(const std::vector<std::vector<std::vector<std::vector<double>>>>& raw);
  /// Cubic polynomial map; each component must be homogeneous of degree 3 in N variables.
  static SymmetricTrilinear from_cubic(std::span<const Polynomial> components);
  /// JSON array indexed [a][i][j][k]; symmetrized on load.
  static SymmetricTrilinear from_json(std::string_view text);

  std::size_t n() const noexcept { return n_; }
  std::size_t N() const noexcept { return N_; }

  double operator()(std::size_t a, std::size_t i, std::size_t j, std::size_t k) const {
    return data_[index(a, i, j, k)];
  }
  void set(std::size_t a, std::size_t i, std::size_t j, std::size_t k, double value);

  Eigen::VectorXd apply(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& z) const;
  /// n x N matrix of x -> T(u, v, x).
  Eigen::MatrixXd partial(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;
  /// Symmetric N x N matrix of T_a(u, ., .).
  Eigen::MatrixXd slice(std::size_t a, const Eigen::VectorXd& u) const;

  SymmetricTrilinear symmetrize() const;
  double max_asymmetry() const;
  double frobenius_norm() const;
  bool operator==(const SymmetricTrilinear& o) const = default;

 private:
  std::size_t index(std::size_t a, std::size_t i, std::size_t j, std::size_t k) const {
    return ((a * N_ + i) * N_ + j) * N_ + k;
  }
  std::size_t n_;
  std::size_t N_;
  std::vector<double> data_;
};

struct CubicJet {
  Eigen::VectorXd value;               // P(v)
  Eigen::MatrixXd jacobian;            // dP_v = 3 T(v, v, .)
  std::vector<Eigen::MatrixXd> hessian;  // d2P_v per output: 6 T_a(v, ., .)
};

CubicJet cubic_eval_and_diff(const SymmetricTrilinear& T, const Eigen::VectorXd& v);

/// L(x) = d3P(x, ., .) = 6 T(x, ., .), one symmetric matrix per output.
std::vector<Eigen::MatrixXd> third_diff_map(const SymmetricTrilinear& T, const Eigen::VectorXd& x);

struct SearchOptions {
  std::size_t attempts = 100;
  std::uint64_t seed = 20240917;
  std::size_t max_iter = 200;
  double residual_tol = 1e-10;
  /// Relative smallest-singular-value threshold for surjectivity.
  double sigma_rel_tol = 1e-6;
};

struct RegularZero {
  Eigen::VectorXd v;  // unit vector
  double residual = 0.0;
  double sigma_min = 0.0;
  std::size_t attempt = 0;
};

/// Multi-start Gauss-Newton on {P(v) = 0, |v| = 1}; nullopt is inconclusive, not a proof.
std::optional<RegularZero> regular_zero_search(const SymmetricTrilinear& T, const SearchOptions& opts = {});

/// Common nonzero zero of the quadratic forms x -> x^T Q_i x on the unit sphere, if one is found.
std::optional<Eigen::VectorXd> common_isotropic_test(std::span<const Eigen::MatrixXd> forms,
                                                     const SearchOptions& opts = {});
/// Forms Q_i(x) = lambda d3P(e_i, x, x).
std::optional<Eigen::VectorXd> common_isotropic_test(const SymmetricTrilinear& T, const Eigen::VectorXd& lambda,
                                                     const SearchOptions& opts = {});

enum class W0Status { certified, not_certified, precondition_failed };
const char* to_string(W0Status s);

struct W0Verdict {
  W0Status status = W0Status::not_certified;
  /// "w0-regular-zero", "corank-one", or empty.
  std::string route;
  bool regular_zero = false;
  std::size_t image_dim = 0;        // dim Im(F, 2, w0)
  std::size_t second_coker_dim = 0;  // dim coker(F, 2, w0)
  std::size_t domain_dim = 0;        // dim of the third-order domain inside the probe span
  std::size_t probe_count = 0;
  /// Probe surrogate of the dimension inequality image_dim + domain_dim > dim M.
  bool dimension_inequality = false;
  double third_projection = 0.0;     // |pi D3(v0)| on coker(F, 2, w0)
  double surjectivity_sigma = 0.0;   // smallest singular value of x -> pi D3(v0, v0, x)
  std::vector<std::string> notes;
};

W0Verdict w0_regular_zero_check(const EndpointProblem& P, std::span<const Eigen::VectorXd> lambdas,
                                const ControlSignal& w0, const ControlSignal& v0,
                                std::span<const ControlSignal> probes, double tol = 1e-8);

/**
 * @brief Second-order data of an end-point problem restricted to the probe span.
 *
 * Coefficient vectors index the probe list. kernel and domain hold orthonormal
 * coefficient bases of ker(d0F) and of the third-order domain inside the span.
 */
struct ProbeCalculus {
  Eigen::MatrixXd first;                 // dim x m, columns d0F(probe)
  std::vector<Eigen::MatrixXd> hessian;  // per lambda, m x m symmetric pairings
  Eigen::MatrixXd kernel;                // m x K
  Eigen::MatrixXd domain;                // m x D
};

ProbeCalculus probe_calculus(const EndpointProblem& P, std::span<const Eigen::VectorXd> lambdas,
                             std::span<const ControlSignal> probes);

/// Linear combination sum coef[i] * probes[i].
ControlSignal combine(std::span<const ControlSignal> probes, const Eigen::VectorXd& coef);

}  // namespace endpt

#endif  // ENDPT_CUBIC_HPP
