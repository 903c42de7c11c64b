#ifndef ENDPT_VECTOR_FIELD_HPP
#define ENDPT_VECTOR_FIELD_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "endpt/polynomial.hpp"

namespace endpt {

/**
 * @brief Polynomial vector field on R^dim.
 *
 * Components are polynomials in nvars >= dim variables plus t. Variables
 * with index >= dim are frozen parameters: they are never moved by the
 * field and never differentiated by brackets. Time is also frozen.
 */
class PolyVectorField {
 public:
  PolyVectorField() = default;
  explicit PolyVectorField(std::vector<Polynomial> components);

  static PolyVectorField zero(std::size_t dim, std::size_t nvars);
  static PolyVectorField zero(std::size_t dim) { return zero(dim, dim); }
  /// The coordinate field d/dx_{i+1}.
  static PolyVectorField coordinate(std::size_t dim, std::size_t i);
  static PolyVectorField parse(const std::vector<std::string>& components, std::size_t dim);

  std::size_t dim() const noexcept { return comps_.size(); }
  std::size_t nvars() const noexcept { return comps_.empty() ? 0 : comps_.front().nvars(); }
  const std::vector<Polynomial>& components() const noexcept { return comps_; }
  const Polynomial& operator[](std::size_t i) const { return comps_.at(i); }
  bool is_zero() const;

  /// Directional derivative X(p) = sum_i X_i dp/dx_i over the moving variables.
  Polynomial apply(const Polynomial& p) const;

  Eigen::VectorXd eval(const Eigen::VectorXd& q, double t) const;
  /// Jacobian in the moving variables, dim x dim.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& q, double t) const;

  PolyVectorField& operator+=(const PolyVectorField& o);
  PolyVectorField& operator-=(const PolyVectorField& o);
  friend PolyVectorField operator+(PolyVectorField a, const PolyVectorField& b) { return a += b; }
  friend PolyVectorField operator-(PolyVectorField a, const PolyVectorField& b) { return a -= b; }
  friend PolyVectorField operator*(const Polynomial& f, const PolyVectorField& X);
  friend PolyVectorField operator*(double c, const PolyVectorField& X);

  /// Componentwise substitution, see Polynomial::compose.
  PolyVectorField compose(std::span<const Polynomial> state_subs, const Polynomial& time_sub) const;

  /// Drops coefficients with magnitude at most tol.
  PolyVectorField pruned(double tol) const;

  std::vector<std::string> to_strings() const;

  friend bool operator==(const PolyVectorField& a, const PolyVectorField& b) {
    return a.comps_ == b.comps_;
  }

 private:
  void check_compatible(const PolyVectorField& o) const;

  std::vector<Polynomial> comps_;
};

/// [X,Y]_k = sum_i X_i d_i Y_k - Y_i d_i X_k, with t and parameters frozen.
PolyVectorField lie_bracket(const PolyVectorField& X, const PolyVectorField& Y);

}  // namespace endpt

#endif  // ENDPT_VECTOR_FIELD_HPP
