#include "endpt/report.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "endpt/builtin.hpp"
#include "endpt/conditions.hpp"
#include "endpt/cubic.hpp"
#include "endpt/errors.hpp"
#include "endpt/openness.hpp"

namespace endpt {

using nlohmann::json;

const char* to_string(OpennessMode m) {
  switch (m) {
    case OpennessMode::off: return "off";
    case OpennessMode::corank1: return "corank1";
    case OpennessMode::general: return "general";
  }
  return "?";
}

OpennessMode parse_openness_mode(std::string_view s) {
  if (s == "off") return OpennessMode::off;
  if (s == "corank1") return OpennessMode::corank1;
  if (s == "general") return OpennessMode::general;
  throw ValidationError("unknown openness mode '" + std::string(s) + "' (off, corank1, general)");
}

namespace {

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

template <class T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ValidationError(where + ": missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": \"" + key + "\" has the wrong type");
  }
}

template <class T>
void optional_field(const json& j, const char* key, T& out, const std::string& where) {
  if (j.contains(key)) out = field<T>(j, key, where);
}

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Parse every text item, prefixing errors with the offending location.
void check_text(const SystemSpec& s) {
  if (s.dimension == 0) throw ValidationError("spec: dimension must be positive");
  if (s.fields.empty()) throw ValidationError("spec: at least one field is required");
  for (std::size_t i = 0; i < s.fields.size(); ++i) {
    if (s.fields[i].size() != s.dimension)
      throw ValidationError("spec: fields[" + std::to_string(i) + "] has " + std::to_string(s.fields[i].size()) +
                            " components, dimension is " + std::to_string(s.dimension));
    for (std::size_t r = 0; r < s.dimension; ++r) {
      try {
        (void)Polynomial::parse(s.fields[i][r], s.dimension);
      } catch (const ParseError& e) {
        // Drop the position suffix; the rethrow adds it again.
        std::string msg = e.what();
        msg = msg.substr(0, msg.rfind(" (line "));
        throw ParseError("spec: fields[" + std::to_string(i) + "][" + std::to_string(r) + "]: " + msg, e.line(),
                         e.column());
      }
    }
  }
  if (s.q0.size() != s.dimension)
    throw ValidationError("spec: q0 has " + std::to_string(s.q0.size()) + " entries, dimension is " +
                          std::to_string(s.dimension));
  auto signal = [&](const std::vector<std::string>& ch, const std::string& what) {
    if (ch.size() != s.k())
      throw ValidationError("spec: " + what + " has " + std::to_string(ch.size()) + " channels, expected " +
                            std::to_string(s.k()));
    (void)ControlSignal::parse(ch);
  };
  signal(s.control, "control");
  for (std::size_t i = 0; i < s.perturbations.size(); ++i) signal(s.perturbations[i], "perturbations[" + std::to_string(i) + "]");
  if (!s.w0.empty()) signal(s.w0, "w0");
  if (!s.v0.empty()) signal(s.v0, "v0");
  for (const auto& c : s.covectors)
    if (c.size() != s.dimension) throw ValidationError("spec: covector length differs from the dimension");
  if (!(s.svd_tol > 0.0) || !(s.membership_tol > 0.0)) throw ValidationError("spec: tolerances must be positive");
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json verdict_json(const ConditionVerdict& v, std::size_t grid) {
  json j{{"name", v.name},           {"holds", v.holds},   {"max_violation", v.max_violation},
         {"tolerance", v.tolerance}, {"symbolic", v.symbolic}, {"grid_points", grid},
         {"notes", v.notes}};
  if (v.witness) j["witness"] = {{"time", v.witness->time}, {"indices", v.witness->indices}};
  return j;
}

json coverage_json(const CoverageResult& c) {
  std::size_t diverged = 0, max_iter = 0;
  for (const auto& t : c.targets) {
    diverged += t.diverged ? 1 : 0;
    max_iter = std::max(max_iter, t.iterations);
  }
  return {{"fraction", c.fraction},
          {"reached", c.reached},
          {"targets", c.targets.size()},
          {"diverged", diverged},
          {"max_iterations_used", max_iter},
          {"certified", c.certified},
          {"epsilon", c.epsilon},
          {"delta", c.delta},
          {"tolerance", c.tol},
          {"max_radius_ratio", c.max_radius_ratio},
          {"notes", c.notes}};
}

json openness_json(const OpennessVerdict& v, const OpennessOptions& o, OpennessMode mode) {
  json j{{"mode", to_string(mode)}, {"certified", v.certified}, {"reason", v.reason}};
  j["parameters"] = {{"residual_tolerance", o.family.residual_tol},
                     {"integrator", {{"stages", o.family.evaluator.stages}, {"steps", o.family.evaluator.steps}}},
                     {"slope_eps", o.slope_eps},
                     {"slope_min", o.slope_min},
                     {"iteration_cap", o.cover.max_iter}};
  if (v.family) {
    j["family"] = {{"kind", to_string(v.family->kind)},
                   {"order", v.family->order},
                   {"parameters", v.family->param_dim()},
                   {"surjective", v.family->surjective},
                   {"residuals", v.family->residuals},
                   {"notes", v.family->notes}};
  }
  if (v.coverage) j["coverage"] = coverage_json(*v.coverage);
  if (v.expansion)
    j["expansion"] = {{"eps", v.expansion->eps}, {"remainder", v.expansion->remainder}, {"slope", v.expansion->slope}};
  return j;
}

}  // namespace

SystemSpec builtin_spec(int p) {
  if (p < 1) throw ValidationError("builtin:example-p needs p >= 1, got " + std::to_string(p));
  SystemSpec s;
  s.source = "builtin:example-" + std::to_string(p);
  s.builtin = p;
  s.dimension = 3;
  for (const auto& f : builtin::example_fields(p)) s.fields.push_back(f.to_strings());
  const Eigen::VectorXd q0 = builtin::example_q0();
  s.q0.assign(q0.data(), q0.data() + q0.size());
  s.control = builtin::example_control().to_strings();
  s.perturbations = {builtin::example_perturbation().to_strings()};
  // Candidate annihilator of the example, also used when d0F is onto (p = 1).
  s.covectors = {{0.0, 0.0, 1.0}};
  return s;
}

SystemSpec parse_system_spec_text(std::string_view text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError("spec: malformed JSON", line, col);
  }
  if (!j.is_object()) throw ValidationError("spec: top level must be an object");
  const std::string schema = field<std::string>(j, "schema", "spec");
  if (schema != kSpecSchema) throw ValidationError("spec: unsupported schema '" + schema + "'");

  SystemSpec s;
  if (j.contains("builtin")) {
    const std::string b = field<std::string>(j, "builtin", "spec");
    const std::string prefix = "example-";
    if (b.rfind(prefix, 0) != 0) throw ValidationError("spec: unknown builtin '" + b + "'");
    int p = 0;
    try {
      std::size_t used = 0;
      p = std::stoi(b.substr(prefix.size()), &used);
      if (used != b.size() - prefix.size()) throw std::invalid_argument(b);
    } catch (const std::logic_error&) {
      throw ValidationError("spec: builtin '" + b + "' needs an integer p");
    }
    s = builtin_spec(p);
  } else {
    s.dimension = field<std::size_t>(j, "dimension", "spec");
    s.fields = field<std::vector<std::vector<std::string>>>(j, "fields", "spec");
    s.q0 = field<std::vector<double>>(j, "q0", "spec");
    s.control = field<std::vector<std::string>>(j, "control", "spec");
  }
  s.source = source;
  optional_field(j, "perturbations", s.perturbations, "spec");
  optional_field(j, "covectors", s.covectors, "spec");
  optional_field(j, "probe_max_freq", s.probe_max_freq, "spec");
  optional_field(j, "w0", s.w0, "spec");
  optional_field(j, "v0", s.v0, "spec");
  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    optional_field(t, "svd", s.svd_tol, "spec.tolerances");
    optional_field(t, "membership", s.membership_tol, "spec.tolerances");
  }
  check_text(s);
  return s;
}

SystemSpec parse_system_spec(const std::string& path_or_builtin) {
  const std::string prefix = "builtin:";
  if (path_or_builtin.rfind(prefix, 0) == 0) {
    SystemSpec s = parse_system_spec_text(
        json{{"schema", kSpecSchema}, {"builtin", path_or_builtin.substr(prefix.size())}}.dump(), path_or_builtin);
    return s;
  }
  std::ifstream in(path_or_builtin);
  if (!in) throw ValidationError("spec: cannot open '" + path_or_builtin + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_system_spec_text(ss.str(), path_or_builtin);
}

json to_json(const SystemSpec& s) {
  json j{{"schema", kSpecSchema},
         {"probe_max_freq", s.probe_max_freq},
         {"tolerances", {{"svd", s.svd_tol}, {"membership", s.membership_tol}}}};
  if (s.builtin) {
    j["builtin"] = "example-" + std::to_string(*s.builtin);
    // Keep explicit extras only when they differ from the builtin defaults.
    const SystemSpec d = builtin_spec(*s.builtin);
    if (s.perturbations != d.perturbations) j["perturbations"] = s.perturbations;
    if (s.covectors != d.covectors) j["covectors"] = s.covectors;
  } else {
    j["dimension"] = s.dimension;
    j["fields"] = s.fields;
    j["q0"] = s.q0;
    j["control"] = s.control;
    j["perturbations"] = s.perturbations;
  }
  if (!s.builtin && !s.covectors.empty()) j["covectors"] = s.covectors;
  if (!s.w0.empty()) j["w0"] = s.w0;
  if (!s.v0.empty()) j["v0"] = s.v0;
  return j;
}

EndpointProblem make_problem(const SystemSpec& s, const RunFlags& f) {
  if (!(f.rk_step > 0.0)) throw ValidationError("--rk-step must be positive");
  if (f.grid < 2) throw ValidationError("--grid needs at least 2 points");
  std::vector<PolyVectorField> fields;
  for (const auto& comps : s.fields) fields.push_back(PolyVectorField::parse(comps, s.dimension));
  EndpointOptions o;
  o.svd_rel_tol = f.svd_tol.value_or(s.svd_tol);
  o.membership_tol = s.membership_tol;
  o.probe_max_freq = f.probe_max_freq.value_or(s.probe_max_freq);
  o.grid_points = f.grid;
  o.flow.rk_step = f.rk_step;
  return EndpointProblem(std::move(fields), ControlSignal::parse(s.control), to_eigen(s.q0), o);
}

AnalysisReport run_report(const SystemSpec& s, const RunFlags& f) {
  const EndpointProblem P = make_problem(s, f);
  const EndpointOptions& o = P.options();
  const std::vector<double> grid = uniform_grid(f.grid);
  AnalysisReport out;
  json& r = out.body;
  r["schema"] = kReportSchema;
  r["generated_at"] = timestamp();
  r["system"] = {{"source", s.source},
                 {"spec", to_json(s)},
                 {"dimension", P.dim()},
                 {"controls", P.k()},
                 {"q1", vec(P.q1())},
                 {"flow_backend", P.exact() ? "exact" : "numeric"}};
  r["provenance"] = {{"tool_version", kToolVersion},
                     {"seed", f.seed},
                     {"tolerances", {{"svd_rel", o.svd_rel_tol}, {"membership", o.membership_tol}}},
                     {"grids", {{"cokernel_points", o.grid_points},
                                {"condition_points", grid.size()},
                                {"probe_max_freq", o.probe_max_freq},
                                {"probe_count", P.probes().size()},
                                {"rk_step", o.flow.rk_step}}}};

  // Covectors: supplied ones (normalized) or the computed cokernel basis.
  std::vector<Eigen::VectorXd> lambdas = P.cokernel().lambdas;
  json coker = json::array();
  for (const auto& l : lambdas) coker.push_back(vec(l));
  r["first_order"] = {{"corank", P.cokernel().corank()},
                      {"cokernel", coker},
                      {"svd_rel_tol", o.svd_rel_tol},
                      {"grid_points", o.grid_points}};
  if (!s.covectors.empty()) {
    lambdas.clear();
    for (const auto& c : s.covectors) {
      const Eigen::VectorXd l = to_eigen(c);
      if (l.norm() == 0.0) throw ValidationError("spec: zero covector");
      lambdas.push_back(l.normalized());
    }
    r["first_order"]["supplied_covectors"] = true;
  }

  try {
    const SingularityReport sing = singularity_classify(P);
    r["singularity"] = {{"class", to_string(sing.kind)},
                        {"critical", sing.critical},
                        {"extended_corank", sing.extended_corank},
                        {"has_normal", sing.has_normal},
                        {"has_abnormal", sing.has_abnormal},
                        {"svd_rel_tol", o.svd_rel_tol},
                        {"probe_count", P.probes().size()}};
  } catch (const ValidationError& e) {
    r["singularity"] = {{"class", nullptr}, {"unavailable", e.what()}};
  }

  if (!P.exact()) {
    r["notes"].push_back("numeric flow backend: second- and third-order sections skipped");
    return out;
  }

  json conds = json::array();
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const AdjointCurve adj = normalized_adjoint(P, lambdas[i]);
    json c{{"lambda", vec(lambdas[i])}};
    c["pmp"] = verdict_json(pmp_check(P, adj, grid, o.membership_tol), grid.size());
    c["goh"] = verdict_json(goh_check(P, adj, grid, o.membership_tol), grid.size());
    c["third_order"] = verdict_json(third_order_condition(P, adj, grid, o.membership_tol), grid.size());
    conds.push_back(std::move(c));
  }
  r["conditions"] = conds;

  // Hessian on seeded random kernel controls drawn from the probe kernel.
  json samples = json::array();
  if (!lambdas.empty() && f.hessian_samples > 0) {
    const ProbeCalculus pc = probe_calculus(P, lambdas, P.probes());
    if (pc.kernel.cols() > 0) {
      std::mt19937_64 rng(f.seed);
      std::normal_distribution<double> normal;
      for (std::size_t n = 0; n < f.hessian_samples; ++n) {
        Eigen::VectorXd c(pc.kernel.cols());
        for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = normal(rng);
        const ControlSignal v = combine(P.probes(), pc.kernel * c.normalized());
        json row = json::array();
        for (const auto& l : lambdas) row.push_back(hessian_scalar(P, l, v, v));
        samples.push_back(row);
      }
    }
  }
  r["hessian_samples"] = {{"seed", f.seed}, {"count", samples.size()}, {"values", samples},
                          {"tolerance", o.membership_tol}, {"note", "rows: samples, columns: covectors"}};

  json perts = json::array();
  for (const auto& text : s.perturbations) {
    const ControlSignal v = ControlSignal::parse(text);
    json e{{"control", text}};
    const Eigen::VectorXd d = first_diff(P, v);
    e["kernel_residual"] = d.norm();
    e["in_kernel"] = d.norm() <= o.membership_tol;
    const bool dom = !lambdas.empty() && dom3_membership(P, lambdas, v, P.probes());
    e["in_domain"] = dom;
    json hess = json::array(), third = json::array(), raw = json::array();
    for (const auto& l : lambdas) {
      hess.push_back(hessian_scalar(P, l, v, v, IntegrationPath::automatic, false));
      raw.push_back(third_scalar(P, l, v, IntegrationPath::automatic, false));
      third.push_back(dom ? json(third_scalar(P, l, v)) : json(nullptr));
    }
    e["hessian"] = hess;
    e["third"] = third;
    e["third_unchecked"] = raw;
    e["tolerance"] = o.membership_tol;
    perts.push_back(std::move(e));
  }
  r["perturbations"] = perts;

  if (f.openness != OpennessMode::off) {
    OpennessOptions oo;
    oo.family.residual_tol = 1e-8;
    OpennessVerdict v;
    if (f.openness == OpennessMode::corank1) {
      if (s.perturbations.empty()) {
        v.reason = "no perturbation supplied";
      } else if (lambdas.size() != 1) {
        v.reason = "construction inapplicable: corank " + std::to_string(lambdas.size()) + " is not one";
      } else {
        v = openness_corank1(P, lambdas[0], ControlSignal::parse(s.perturbations[0]), oo);
      }
    } else {
      if (s.w0.empty() || s.v0.empty()) throw ValidationError("--openness general needs w0 and v0 in the spec");
      v = openness_general(P, lambdas, ControlSignal::parse(s.w0), ControlSignal::parse(s.v0), oo);
    }
    r["openness"] = openness_json(v, oo, f.openness);
    r["openness"]["verdict"] = v.certified ? "certified" : "not-certified";
    if (v.coverage) out.coverage_csv = coverage_csv(*v.coverage);
  }
  return out;
}

AnalysisReport cubic_report(std::string_view tensor_json, const RunFlags& f) {
  const SymmetricTrilinear T = SymmetricTrilinear::from_json(tensor_json);
  SearchOptions so;
  so.seed = f.seed;
  AnalysisReport out;
  json& r = out.body;
  r["schema"] = kReportSchema;
  r["generated_at"] = timestamp();
  r["tensor"] = {{"targets", T.n()}, {"variables", T.N()}, {"frobenius_norm", T.frobenius_norm()}};
  r["provenance"] = {{"tool_version", kToolVersion},
                     {"seed", f.seed},
                     {"attempts", so.attempts},
                     {"max_iter", so.max_iter},
                     {"tolerances", {{"residual", so.residual_tol}, {"sigma_rel", so.sigma_rel_tol}}}};
  const auto z = regular_zero_search(T, so);
  json rz{{"found", z.has_value()}};
  if (z) {
    rz["v"] = vec(z->v);
    rz["residual"] = z->residual;
    rz["sigma_min"] = z->sigma_min;
    rz["attempt"] = z->attempt;
  } else {
    rz["note"] = "none found; inconclusive";
  }
  r["regular_zero"] = rz;
  // Common isotropic vectors of lambda L(e_i) for each coordinate covector.
  json iso = json::array();
  for (std::size_t a = 0; a < T.n(); ++a) {
    const Eigen::VectorXd l = Eigen::VectorXd::Unit(static_cast<Eigen::Index>(T.n()), static_cast<Eigen::Index>(a));
    const auto w = common_isotropic_test(T, l, so);
    json e{{"lambda", vec(l)}, {"found", w.has_value()}};
    if (w) e["w"] = vec(*w);
    iso.push_back(std::move(e));
  }
  r["isotropic"] = iso;
  return out;
}

json without_timestamp(const json& report) {
  json j = report;
  j.erase("generated_at");
  return j;
}

}  // namespace endpt
