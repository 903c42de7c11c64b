// endpt: end-point map analysis from the command line.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "endpt/errors.hpp"
#include "endpt/report.hpp"

namespace {

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw endpt::ValidationError("cannot write '" + path + "'");
  out << text;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw endpt::ValidationError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"End-point map analysis of control-affine polynomial systems"};
  app.require_subcommand(1);

  endpt::RunFlags flags;
  std::string out_path, csv_path, openness = "corank1";
  unsigned probe_max_freq = 0;
  double svd_tol = 0.0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--rk-step", flags.rk_step, "RK step of the numeric flow backend");
    sub->add_option("--grid", flags.grid, "Uniform time grid size for cokernel and condition checks");
    sub->add_option("--probe-max-freq", probe_max_freq, "Highest probe frequency");
    sub->add_option("--svd-tol", svd_tol, "Relative SVD rank threshold");
    sub->add_option("--seed", flags.seed, "Seed for randomized searches and samples");
    sub->add_option("--out", out_path, "Report path (default stdout)");
  };

  std::string spec_arg, tensor_path;
  int example_p = 3;

  auto* analyze = app.add_subcommand("analyze", "Full report for a system spec");
  analyze->add_option("spec", spec_arg, "Spec file or builtin:example-p")->required();
  common(analyze);
  analyze->add_option("--openness", openness, "off | corank1 | general");
  analyze->add_option("--csv", csv_path, "Coverage grid CSV");

  auto* example = app.add_subcommand("example", "Report for builtin:example-p");
  example->add_option("p", example_p, "Exponent p >= 1")->required();
  common(example);
  example->add_option("--openness", openness, "off | corank1 | general");
  example->add_option("--csv", csv_path, "Coverage grid CSV");

  auto* cubic = app.add_subcommand("cubic", "Regular zeros and isotropy of a cubic map");
  cubic->add_option("tensor", tensor_path, "JSON tensor T[a][i][j][k]")->required();
  common(cubic);

  auto* open = app.add_subcommand("openness", "Openness verification only");
  open->add_option("spec", spec_arg, "Spec file or builtin:example-p")->required();
  common(open);
  open->add_option("--openness", openness, "corank1 | general");
  open->add_option("--csv", csv_path, "Coverage grid CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (probe_max_freq > 0) flags.probe_max_freq = probe_max_freq;
    if (svd_tol > 0.0) flags.svd_tol = svd_tol;
    flags.openness = endpt::parse_openness_mode(openness);

    endpt::AnalysisReport report;
    if (*cubic) {
      report = endpt::cubic_report(slurp(tensor_path), flags);
    } else {
      const endpt::SystemSpec spec = *example ? endpt::builtin_spec(example_p) : endpt::parse_system_spec(spec_arg);
      if (*open) {
        if (flags.openness == endpt::OpennessMode::off)
          throw endpt::ValidationError("openness subcommand needs corank1 or general");
        flags.hessian_samples = 0;
      }
      report = endpt::run_report(spec, flags);
      if (*open) {
        nlohmann::json slim;
        for (const char* key : {"schema", "generated_at", "system", "provenance", "first_order", "openness"})
          if (report.body.contains(key)) slim[key] = report.body[key];
        report.body = std::move(slim);
      }
    }
    emit(report.dump(), out_path);
    if (!csv_path.empty()) {
      if (!report.coverage_csv) throw endpt::ValidationError("--csv: no openness coverage was computed");
      emit(*report.coverage_csv, csv_path);
    }
    return 0;
  } catch (const endpt::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const endpt::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  }
}
