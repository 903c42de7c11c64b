#include "endpt/cubic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <json.hpp>
#include <random>
#include <sstream>

#include "endpt/errors.hpp"

namespace endpt {

namespace {

constexpr std::array<std::array<int, 3>, 6> perms{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

std::string num(double x) {
  std::ostringstream os;
  os.precision(3);
  os << x;
  return os.str();
}

using ResidualFn = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd&)>;

// Levenberg-Marquardt from x; returns the final point.
Eigen::VectorXd levenberg_marquardt(const ResidualFn& fn, Eigen::VectorXd x, std::size_t max_iter) {
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  fn(x, r, J);
  double cost = r.squaredNorm();
  double mu = 1e-3;
  for (std::size_t it = 0; it < max_iter && cost > 1e-30; ++it) {
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    const double scale = std::max(1.0, JtJ.diagonal().maxCoeff());
    bool accepted = false;
    for (int tries = 0; tries < 30 && !accepted; ++tries) {
      const Eigen::MatrixXd A = JtJ + mu * scale * Eigen::MatrixXd::Identity(x.size(), x.size());
      const Eigen::VectorXd dx = -A.ldlt().solve(g);
      Eigen::VectorXd r2;
      Eigen::MatrixXd J2;
      fn(x + dx, r2, J2);
      const double c2 = r2.squaredNorm();
      if (std::isfinite(c2) && c2 < cost) {
        x += dx;
        r = std::move(r2);
        J = std::move(J2);
        const bool stalled = cost - c2 < 1e-16 * cost && dx.norm() < 1e-15 * std::max(1.0, x.norm());
        cost = c2;
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
        if (stalled) return x;
      } else {
        mu *= 4.0;
      }
    }
    if (!accepted) break;
  }
  return x;
}

Eigen::VectorXd random_unit(std::mt19937_64& rng, Eigen::Index N) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(N);
  for (auto& x : v) x = g(rng);
  const double nrm = v.norm();
  return nrm > 0.0 ? Eigen::VectorXd(v / nrm) : Eigen::VectorXd::Unit(N, 0);
}

std::mt19937_64 attempt_rng(std::uint64_t seed, std::size_t attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(attempt)};
  return std::mt19937_64(seq);
}

double smallest_singular(const Eigen::MatrixXd& A) {
  if (A.rows() == 0) return 0.0;
  if (A.rows() > A.cols()) return 0.0;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  return svd.singularValues()(A.rows() - 1);
}

std::size_t numeric_rank(const Eigen::VectorXd& sv, double rel, double abs_floor) {
  if (sv.size() == 0) return 0;
  const double thr = std::max(rel * sv(0), abs_floor);
  std::size_t r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) r += sv(i) > thr ? 1 : 0;
  return r;
}

// Orthonormal basis of the null space of A (columns).
Eigen::MatrixXd null_space(const Eigen::MatrixXd& A, double rel, double abs_floor) {
  const Eigen::Index m = A.cols();
  if (A.rows() == 0) return Eigen::MatrixXd::Identity(m, m);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto r = static_cast<Eigen::Index>(numeric_rank(svd.singularValues(), rel, abs_floor));
  return svd.matrixV().rightCols(m - r);
}

}  // namespace

SymmetricTrilinear::SymmetricTrilinear(std::size_t n, std::size_t N) : n_(n), N_(N), data_(n * N * N * N, 0.0) {
  if (n == 0 || N == 0) throw ValidationError("SymmetricTrilinear: dimensions must be positive");
}

void SymmetricTrilinear::set(std::size_t a, std::size_t i, std::size_t j, std::size_t k, double value) {
  if (a >= n_ || i >= N_ || j >= N_ || k >= N_) throw ValidationError("SymmetricTrilinear::set: index out of range");
  const std::array<std::size_t, 3> idx{i, j, k};
  for (const auto& p : perms) data_[index(a, idx[p[0]], idx[p[1]], idx[p[2]])] = value;
}

SymmetricTrilinear SymmetricTrilinear::symmetrized(
    const std::vector<std::vector<std::vector<std::vector<double>>>>& raw) {
  const std::size_t n = raw.size();
  if (n == 0 || raw[0].empty()) throw ValidationError("trilinear tensor: empty array");
  const std::size_t N = raw[0].size();
  for (const auto& A : raw) {
    if (A.size() != N) throw ValidationError("trilinear tensor: ragged array");
    for (const auto& B : A) {
      if (B.size() != N) throw ValidationError("trilinear tensor: ragged array");
      for (const auto& C : B)
        if (C.size() != N) throw ValidationError("trilinear tensor: ragged array");
    }
  }
  SymmetricTrilinear T(n, N);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = i; j < N; ++j)
        for (std::size_t k = j; k < N; ++k) {
          const std::array<std::size_t, 3> idx{i, j, k};
          double s = 0.0;
          for (const auto& p : perms) s += raw[a][idx[p[0]]][idx[p[1]]][idx[p[2]]];
          T.set(a, i, j, k, s / 6.0);
        }
  return T;
}

SymmetricTrilinear SymmetricTrilinear::from_cubic(std::span<const Polynomial> components) {
  if (components.empty()) throw ValidationError("from_cubic: no components");
  const std::size_t N = components[0].nvars();
  SymmetricTrilinear T(components.size(), N);
  for (std::size_t a = 0; a < components.size(); ++a) {
    if (components[a].nvars() != N) throw ValidationError("from_cubic: components disagree on variable count");
    for (const auto& [e, c] : components[a].terms()) {
      if (e[N] != 0) throw ValidationError("from_cubic: time dependence not allowed");
      std::vector<std::size_t> idx;
      for (std::size_t v = 0; v < N; ++v) idx.insert(idx.end(), e[v], v);
      if (idx.size() != 3) throw ValidationError("from_cubic: component is not homogeneous of degree 3");
      // c is shared among the distinct orderings of the index multiset.
      const int distinct = idx[0] == idx[2] ? 1 : (idx[0] == idx[1] || idx[1] == idx[2]) ? 3 : 6;
      T.set(a, idx[0], idx[1], idx[2], T(a, idx[0], idx[1], idx[2]) + c / distinct);
    }
  }
  return T;
}

SymmetricTrilinear SymmetricTrilinear::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("trilinear tensor: ") + e.what());
  }
  std::vector<std::vector<std::vector<std::vector<double>>>> raw;
  try {
    raw = j.get<decltype(raw)>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("trilinear tensor: expected a numeric [a][i][j][k] array: ") + e.what());
  }
  return symmetrized(raw);
}

Eigen::VectorXd SymmetricTrilinear::apply(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& z) const {
  return partial(x, y) * z;
}

Eigen::MatrixXd SymmetricTrilinear::partial(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
  if (static_cast<std::size_t>(u.size()) != N_ || static_cast<std::size_t>(v.size()) != N_)
    throw ValidationError("SymmetricTrilinear: vector dimension mismatch (expected " + std::to_string(N_) + ")");
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(N_));
  for (std::size_t a = 0; a < n_; ++a) M.row(static_cast<Eigen::Index>(a)) = (slice(a, u) * v).transpose();
  return M;
}

Eigen::MatrixXd SymmetricTrilinear::slice(std::size_t a, const Eigen::VectorXd& u) const {
  if (static_cast<std::size_t>(u.size()) != N_)
    throw ValidationError("SymmetricTrilinear: vector dimension mismatch (expected " + std::to_string(N_) + ")");
  const auto N = static_cast<Eigen::Index>(N_);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(N, N);
  for (std::size_t i = 0; i < N_; ++i) {
    if (u(static_cast<Eigen::Index>(i)) == 0.0) continue;
    for (std::size_t j = 0; j < N_; ++j)
      for (std::size_t k = 0; k < N_; ++k)
        S(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) +=
            u(static_cast<Eigen::Index>(i)) * data_[index(a, i, j, k)];
  }
  return S;
}

SymmetricTrilinear SymmetricTrilinear::symmetrize() const {
  SymmetricTrilinear T(n_, N_);
  for (std::size_t a = 0; a < n_; ++a)
    for (std::size_t i = 0; i < N_; ++i)
      for (std::size_t j = 0; j < N_; ++j)
        for (std::size_t k = 0; k < N_; ++k) {
          double s = 0.0;
          const std::array<std::size_t, 3> idx{i, j, k};
          for (const auto& p : perms) s += data_[index(a, idx[p[0]], idx[p[1]], idx[p[2]])];
          T.data_[index(a, i, j, k)] = s / 6.0;
        }
  return T;
}

double SymmetricTrilinear::max_asymmetry() const {
  double worst = 0.0;
  for (std::size_t a = 0; a < n_; ++a)
    for (std::size_t i = 0; i < N_; ++i)
      for (std::size_t j = 0; j < N_; ++j)
        for (std::size_t k = 0; k < N_; ++k) {
          const std::array<std::size_t, 3> idx{i, j, k};
          for (const auto& p : perms)
            worst = std::max(worst, std::abs(data_[index(a, i, j, k)] -
                                             data_[index(a, idx[p[0]], idx[p[1]], idx[p[2]])]));
        }
  return worst;
}

double SymmetricTrilinear::frobenius_norm() const {
  double s = 0.0;
  for (double x : data_) s += x * x;
  return std::sqrt(s);
}

CubicJet cubic_eval_and_diff(const SymmetricTrilinear& T, const Eigen::VectorXd& v) {
  CubicJet out;
  const Eigen::MatrixXd Tvv = T.partial(v, v);
  out.value = Tvv * v;
  out.jacobian = 3.0 * Tvv;
  for (std::size_t a = 0; a < T.n(); ++a) out.hessian.push_back(6.0 * T.slice(a, v));
  return out;
}

std::vector<Eigen::MatrixXd> third_diff_map(const SymmetricTrilinear& T, const Eigen::VectorXd& x) {
  std::vector<Eigen::MatrixXd> L;
  for (std::size_t a = 0; a < T.n(); ++a) L.push_back(6.0 * T.slice(a, x));
  return L;
}

std::optional<RegularZero> regular_zero_search(const SymmetricTrilinear& T, const SearchOptions& opts) {
  const auto n = static_cast<Eigen::Index>(T.n());
  const auto N = static_cast<Eigen::Index>(T.N());
  const double sigma_thr = opts.sigma_rel_tol * std::max(1.0, T.frobenius_norm());
  const ResidualFn fn = [&](const Eigen::VectorXd& v, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
    const Eigen::MatrixXd Tvv = T.partial(v, v);
    r.resize(n + 1);
    r.head(n) = Tvv * v;
    r(n) = v.squaredNorm() - 1.0;
    J.resize(n + 1, N);
    J.topRows(n) = 3.0 * Tvv;
    J.row(n) = 2.0 * v.transpose();
  };
  for (std::size_t attempt = 0; attempt < opts.attempts; ++attempt) {
    auto rng = attempt_rng(opts.seed, attempt);
    Eigen::VectorXd v = levenberg_marquardt(fn, random_unit(rng, N), opts.max_iter);
    const double nrm = v.norm();
    if (!std::isfinite(nrm) || nrm < 1e-8) continue;
    v /= nrm;
    const CubicJet jet = cubic_eval_and_diff(T, v);
    const double res = jet.value.norm();
    if (res > opts.residual_tol) continue;
    const double smin = smallest_singular(jet.jacobian);
    if (smin < sigma_thr) continue;
    return RegularZero{v, res, smin, attempt};
  }
  return std::nullopt;
}

std::optional<Eigen::VectorXd> common_isotropic_test(std::span<const Eigen::MatrixXd> forms,
                                                     const SearchOptions& opts) {
  if (forms.empty()) throw ValidationError("common_isotropic_test: no quadratic forms");
  const Eigen::Index N = forms[0].rows();
  double scale = 1.0;
  for (const auto& Q : forms) {
    if (Q.rows() != N || Q.cols() != N) throw ValidationError("common_isotropic_test: form dimension mismatch");
    scale = std::max(scale, Q.norm());
  }
  const auto m = static_cast<Eigen::Index>(forms.size());
  const ResidualFn fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
    r.resize(m + 1);
    J.resize(m + 1, N);
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::MatrixXd S = 0.5 * (forms[static_cast<std::size_t>(i)] + forms[static_cast<std::size_t>(i)].transpose());
      const Eigen::VectorXd Sx = S * x;
      r(i) = x.dot(Sx);
      J.row(i) = 2.0 * Sx.transpose();
    }
    r(m) = x.squaredNorm() - 1.0;
    J.row(m) = 2.0 * x.transpose();
  };
  for (std::size_t attempt = 0; attempt < opts.attempts; ++attempt) {
    auto rng = attempt_rng(opts.seed, attempt);
    Eigen::VectorXd x = levenberg_marquardt(fn, random_unit(rng, N), opts.max_iter);
    const double nrm = x.norm();
    if (!std::isfinite(nrm) || nrm < 1e-8) continue;
    x /= nrm;
    double worst = 0.0;
    for (const auto& Q : forms) worst = std::max(worst, std::abs(x.dot(Q * x)));
    if (worst <= opts.residual_tol * scale) return x;
  }
  return std::nullopt;
}

std::optional<Eigen::VectorXd> common_isotropic_test(const SymmetricTrilinear& T, const Eigen::VectorXd& lambda,
                                                     const SearchOptions& opts) {
  if (static_cast<std::size_t>(lambda.size()) != T.n())
    throw ValidationError("common_isotropic_test: covector dimension mismatch");
  if (lambda.norm() == 0.0) throw ValidationError("common_isotropic_test: lambda must be nonzero");
  std::vector<Eigen::MatrixXd> forms;
  const auto N = static_cast<Eigen::Index>(T.N());
  for (Eigen::Index i = 0; i < N; ++i) {
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(N, N);
    for (std::size_t a = 0; a < T.n(); ++a)
      Q += 6.0 * lambda(static_cast<Eigen::Index>(a)) * T.slice(a, Eigen::VectorXd::Unit(N, i));
    forms.push_back(std::move(Q));
  }
  return common_isotropic_test(forms, opts);
}

const char* to_string(W0Status s) {
  switch (s) {
    case W0Status::certified:
      return "certified";
    case W0Status::not_certified:
      return "not-certified";
    case W0Status::precondition_failed:
      return "precondition-failed";
  }
  return "unknown";
}

ControlSignal combine(std::span<const ControlSignal> probes, const Eigen::VectorXd& coef) {
  if (probes.empty()) throw ValidationError("combine: empty probe list");
  if (static_cast<std::size_t>(coef.size()) != probes.size()) throw ValidationError("combine: coefficient mismatch");
  ControlSignal out = ControlSignal::zero(probes[0].k());
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const double c = coef(static_cast<Eigen::Index>(i));
    if (c != 0.0) out = out + c * probes[i];
  }
  return out;
}

ProbeCalculus probe_calculus(const EndpointProblem& P, std::span<const Eigen::VectorXd> lambdas,
                             std::span<const ControlSignal> probes) {
  const auto m = static_cast<Eigen::Index>(probes.size());
  const double rel = P.options().svd_rel_tol;
  const double floor = P.options().membership_tol;
  ProbeCalculus pc;
  pc.first.resize(static_cast<Eigen::Index>(P.dim()), m);
  for (Eigen::Index i = 0; i < m; ++i) pc.first.col(i) = first_diff(P, probes[static_cast<std::size_t>(i)]);
  pc.kernel = null_space(pc.first, rel, floor);
  for (const auto& l : lambdas) {
    Eigen::MatrixXd H(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = i; j < m; ++j) {
        H(i, j) = hessian_scalar(P, l, probes[static_cast<std::size_t>(i)], probes[static_cast<std::size_t>(j)],
                                 IntegrationPath::automatic, false);
        H(j, i) = H(i, j);
      }
    pc.hessian.push_back(std::move(H));
  }
  // Domain: kernel elements whose pairing with every probe vanishes for every lambda.
  Eigen::MatrixXd S(static_cast<Eigen::Index>(lambdas.size()) * m, pc.kernel.cols());
  for (std::size_t l = 0; l < lambdas.size(); ++l)
    S.middleRows(static_cast<Eigen::Index>(l) * m, m) = pc.hessian[l] * pc.kernel;
  pc.domain = pc.kernel * null_space(S, rel, floor);
  return pc;
}

W0Verdict w0_regular_zero_check(const EndpointProblem& P, std::span<const Eigen::VectorXd> lambdas,
                                const ControlSignal& w0, const ControlSignal& v0,
                                std::span<const ControlSignal> probes, double tol) {
  W0Verdict out;
  out.probe_count = probes.size();
  const auto fail = [&](std::string why) {
    out.status = W0Status::precondition_failed;
    out.notes.push_back(std::move(why));
    return out;
  };
  if (lambdas.empty()) {
    out.status = W0Status::certified;
    out.route = "submersion";
    out.notes.emplace_back("cokernel is trivial");
    return out;
  }
  const double dw = first_diff(P, w0).norm();
  if (dw > tol) return fail("w0 is not in ker d0F (|d0F(w0)| = " + num(dw) + ")");
  for (const auto& l : lambdas) {
    const double h = std::abs(hessian_scalar(P, l, w0, w0));
    if (h > tol) return fail("w0 is not isotropic (|lambda D2(w0, w0)| = " + num(h) + ")");
  }
  const DomainResiduals dr = dom3_residuals(P, lambdas, v0, probes);
  if (dr.first_diff_norm > tol || dr.max_pairing > tol)
    return fail("v0 is outside the third-order domain (|d0F| = " + num(dr.first_diff_norm) +
                ", max pairing = " + num(dr.max_pairing) + ")");

  const ProbeCalculus pc = probe_calculus(P, lambdas, probes);
  const auto cor = static_cast<Eigen::Index>(lambdas.size());
  const auto m = static_cast<Eigen::Index>(probes.size());
  const double rel = P.options().svd_rel_tol;
  out.domain_dim = static_cast<std::size_t>(pc.domain.cols());

  // Im(F, 2, w0) in cokernel coordinates.
  Eigen::MatrixXd W(cor, m);
  for (Eigen::Index j = 0; j < cor; ++j)
    for (Eigen::Index i = 0; i < m; ++i)
      W(j, i) = hessian_scalar(P, lambdas[static_cast<std::size_t>(j)], w0, probes[static_cast<std::size_t>(i)],
                               IntegrationPath::automatic, false);
  const Eigen::MatrixXd image = W * pc.kernel;
  Eigen::MatrixXd coker2;  // cor x c2, orthonormal complement of the image
  if (image.cols() == 0) {
    coker2 = Eigen::MatrixXd::Identity(cor, cor);
  } else {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(image, Eigen::ComputeFullU);
    const auto r = static_cast<Eigen::Index>(numeric_rank(svd.singularValues(), rel, tol));
    out.image_dim = static_cast<std::size_t>(r);
    coker2 = svd.matrixU().rightCols(cor - r);
  }
  out.second_coker_dim = static_cast<std::size_t>(coker2.cols());
  out.dimension_inequality = out.image_dim + out.domain_dim > P.dim();

  Eigen::VectorXd third(cor);
  Eigen::MatrixXd B(cor, m);
  for (Eigen::Index j = 0; j < cor; ++j) {
    const auto& l = lambdas[static_cast<std::size_t>(j)];
    third(j) = third_scalar(P, l, v0, IntegrationPath::automatic, false);
    for (Eigen::Index i = 0; i < m; ++i)
      B(j, i) = trilinear(P, l, v0, v0, probes[static_cast<std::size_t>(i)], IntegrationPath::automatic, false);
  }
  out.third_projection = (coker2.transpose() * third).norm();
  const bool zero = out.third_projection <= tol;
  bool onto = true;
  if (coker2.cols() > 0) {
    const Eigen::MatrixXd S = coker2.transpose() * B * pc.domain;
    out.surjectivity_sigma = smallest_singular(S);
    onto = out.surjectivity_sigma >= 1e-6 * std::max(1.0, S.norm());
  }
  out.regular_zero = zero && onto;
  if (out.regular_zero) {
    out.status = W0Status::certified;
    out.route = "w0-regular-zero";
  } else if (cor == 1 && std::abs(third(0)) > tol) {
    out.status = W0Status::certified;
    out.route = "corank-one";
    out.notes.emplace_back("v0 is not a zero of D3, but corank one with D3(v0) != 0 suffices");
  } else {
    out.status = W0Status::not_certified;
  }
  out.notes.push_back("probe dimensions stand in for dom(D3): " + std::to_string(out.domain_dim) + " of " +
                      std::to_string(out.probe_count) + " probes");
  return out;
}

}  // namespace endpt
