#ifndef ENDPT_REPORT_HPP
#define ENDPT_REPORT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "endpt/endpoint.hpp"

namespace endpt {

inline constexpr const char* kSpecSchema = "endpt-system/1";
inline constexpr const char* kReportSchema = "endpt-report/1";
inline constexpr const char* kToolVersion = "0.1.0";

enum class OpennessMode { off, corank1, general };
const char* to_string(OpennessMode m);
OpennessMode parse_openness_mode(std::string_view s);

/// Problem statement as text. Builtin shortcuts are expanded on parse.
struct SystemSpec {
  std::string source;
  std::optional<int> builtin;
  std::size_t dimension = 0;
  std::vector<std::vector<std::string>> fields;  // fields[i][r]
  std::vector<double> q0;
  std::vector<std::string> control;
  std::vector<std::vector<std::string>> perturbations;
  std::vector<std::vector<double>> covectors;
  unsigned probe_max_freq = 8;
  double svd_tol = 1e-9;
  double membership_tol = 1e-8;
  // Inputs of the general openness construction.
  std::vector<std::string> w0;
  std::vector<std::string> v0;

  std::size_t k() const noexcept { return fields.size(); }
  friend bool operator==(const SystemSpec&, const SystemSpec&) = default;
};

SystemSpec builtin_spec(int p);
/// Accepts "builtin:example-p" or a path to a JSON spec file.
SystemSpec parse_system_spec(const std::string& path_or_builtin);
/// JSON text; errors carry line and column of the document.
SystemSpec parse_system_spec_text(std::string_view text, const std::string& source = "<text>");
nlohmann::json to_json(const SystemSpec& s);

struct RunFlags {
  double rk_step = 1e-3;
  std::size_t grid = 101;
  std::optional<unsigned> probe_max_freq;
  std::optional<double> svd_tol;
  std::uint64_t seed = 20240917;
  OpennessMode openness = OpennessMode::corank1;
  std::size_t hessian_samples = 10;
};

EndpointProblem make_problem(const SystemSpec& s, const RunFlags& f);

struct AnalysisReport {
  nlohmann::json body;
  /// Coverage grid of the openness check, when one ran.
  std::optional<std::string> coverage_csv;

  /// Pretty JSON with sorted keys.
  std::string dump() const { return body.dump(2) + "\n"; }
};

AnalysisReport run_report(const SystemSpec& s, const RunFlags& f);
/// Regular-zero and isotropy analysis of a cubic map given as a JSON tensor.
AnalysisReport cubic_report(std::string_view tensor_json, const RunFlags& f);

/// Copy without the timestamp, for determinism comparisons.
nlohmann::json without_timestamp(const nlohmann::json& report);

}  // namespace endpt

#endif  // ENDPT_REPORT_HPP
