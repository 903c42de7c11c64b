#include "endpt/vector_field.hpp"

#include <algorithm>

#include "endpt/errors.hpp"

namespace endpt {

PolyVectorField::PolyVectorField(std::vector<Polynomial> components) : comps_(std::move(components)) {
  if (comps_.empty()) return;
  const std::size_t nv = comps_.front().nvars();
  for (const auto& c : comps_) {
    if (c.nvars() != nv) throw ValidationError("vector field components disagree on nvars");
  }
  if (nv < comps_.size()) throw ValidationError("vector field has fewer variables than components");
}

PolyVectorField PolyVectorField::zero(std::size_t dim, std::size_t nvars) {
  return PolyVectorField(std::vector<Polynomial>(dim, Polynomial(nvars)));
}

PolyVectorField PolyVectorField::coordinate(std::size_t dim, std::size_t i) {
  std::vector<Polynomial> c(dim, Polynomial(dim));
  c.at(i) = Polynomial::constant(dim, 1.0);
  return PolyVectorField(std::move(c));
}

PolyVectorField PolyVectorField::parse(const std::vector<std::string>& components, std::size_t dim) {
  if (components.size() != dim) {
    throw ValidationError("field has " + std::to_string(components.size()) + " components, expected " +
                          std::to_string(dim));
  }
  std::vector<Polynomial> c;
  c.reserve(dim);
  for (const auto& s : components) c.push_back(Polynomial::parse(s, dim));
  return PolyVectorField(std::move(c));
}

bool PolyVectorField::is_zero() const {
  return std::all_of(comps_.begin(), comps_.end(), [](const Polynomial& p) { return p.is_zero(); });
}

Polynomial PolyVectorField::apply(const Polynomial& p) const {
  if (p.nvars() != nvars()) throw ValidationError("apply: polynomial lives in a different space");
  Polynomial r(p.nvars());
  for (std::size_t i = 0; i < dim(); ++i) {
    if (comps_[i].is_zero()) continue;
    r += comps_[i] * p.partial(i);
  }
  return r;
}

Eigen::VectorXd PolyVectorField::eval(const Eigen::VectorXd& q, double t) const {
  if (static_cast<std::size_t>(q.size()) < nvars()) throw ValidationError("vf_eval: point dimension mismatch");
  Eigen::VectorXd out(static_cast<Eigen::Index>(dim()));
  std::span<const double> x(q.data(), static_cast<std::size_t>(q.size()));
  for (std::size_t i = 0; i < dim(); ++i) out[static_cast<Eigen::Index>(i)] = comps_[i].eval(x, t);
  return out;
}

Eigen::MatrixXd PolyVectorField::jacobian(const Eigen::VectorXd& q, double t) const {
  const auto n = static_cast<Eigen::Index>(dim());
  Eigen::MatrixXd J(n, n);
  std::span<const double> x(q.data(), static_cast<std::size_t>(q.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      J(i, j) = comps_[static_cast<std::size_t>(i)].partial(static_cast<std::size_t>(j)).eval(x, t);
    }
  }
  return J;
}

void PolyVectorField::check_compatible(const PolyVectorField& o) const {
  if (dim() != o.dim() || nvars() != o.nvars()) throw ValidationError("vector field dimension mismatch");
}

PolyVectorField& PolyVectorField::operator+=(const PolyVectorField& o) {
  check_compatible(o);
  for (std::size_t i = 0; i < dim(); ++i) comps_[i] += o.comps_[i];
  return *this;
}

PolyVectorField& PolyVectorField::operator-=(const PolyVectorField& o) {
  check_compatible(o);
  for (std::size_t i = 0; i < dim(); ++i) comps_[i] -= o.comps_[i];
  return *this;
}

PolyVectorField operator*(const Polynomial& f, const PolyVectorField& X) {
  std::vector<Polynomial> c;
  c.reserve(X.dim());
  for (const auto& p : X.comps_) c.push_back(f * p);
  return PolyVectorField(std::move(c));
}

PolyVectorField operator*(double c, const PolyVectorField& X) {
  std::vector<Polynomial> out;
  out.reserve(X.dim());
  for (const auto& p : X.comps_) out.push_back(c * p);
  return PolyVectorField(std::move(out));
}

PolyVectorField PolyVectorField::compose(std::span<const Polynomial> state_subs,
                                         const Polynomial& time_sub) const {
  std::vector<Polynomial> c;
  c.reserve(dim());
  for (const auto& p : comps_) c.push_back(p.compose(state_subs, time_sub));
  return PolyVectorField(std::move(c));
}

PolyVectorField PolyVectorField::pruned(double tol) const {
  std::vector<Polynomial> c;
  c.reserve(dim());
  for (const auto& p : comps_) c.push_back(p.pruned(tol));
  return PolyVectorField(std::move(c));
}

std::vector<std::string> PolyVectorField::to_strings() const {
  std::vector<std::string> out;
  out.reserve(dim());
  for (const auto& p : comps_) out.push_back(p.to_string());
  return out;
}

PolyVectorField lie_bracket(const PolyVectorField& X, const PolyVectorField& Y) {
  if (X.dim() != Y.dim() || X.nvars() != Y.nvars()) throw ValidationError("lie_bracket: dimension mismatch");
  std::vector<Polynomial> c;
  c.reserve(X.dim());
  for (std::size_t k = 0; k < X.dim(); ++k) c.push_back(X.apply(Y[k]) - Y.apply(X[k]));
  return PolyVectorField(std::move(c));
}

}  // namespace endpt
