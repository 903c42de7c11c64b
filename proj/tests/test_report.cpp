#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include "endpt/errors.hpp"
#include "endpt/report.hpp"

using namespace endpt;
using nlohmann::json;

namespace {

std::string temp_file(const std::string& name, const std::string& body) {
  const std::string path = std::string(ENDPT_TEST_TMP) + "/" + name;
  std::ofstream(path) << body;
  return path;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ENDPT_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kToy = R"json({
  "schema": "endpt-system/1",
  "dimension": 2,
  "fields": [["1", "0"], ["0", "x1"]],
  "q0": [0, 0],
  "control": ["1", "0"],
  "perturbations": [["sin(2*pi*t)", "1"]]
})json";

}  // namespace

TEST_CASE("builtin spec expansion") {
  const SystemSpec s = parse_system_spec("builtin:example-3");
  CHECK(s.builtin == 3);
  CHECK(s.dimension == 3);
  CHECK(s.k() == 2);
  REQUIRE(s.fields.size() == 2);
  CHECK(s.fields[1][2] == "x1^3");
  CHECK(s.perturbations.size() == 1);
  CHECK_THROWS_AS(parse_system_spec("builtin:example-0"), ValidationError);
  CHECK_THROWS_AS(parse_system_spec("builtin:example-x"), ValidationError);
  CHECK_THROWS_AS(parse_system_spec("builtin:other-3"), ValidationError);
  CHECK_THROWS_AS(parse_system_spec("/nonexistent/spec.json"), ValidationError);
}

TEST_CASE("spec parse errors") {
  const std::string bad_poly =
      R"({"schema":"endpt-system/1","dimension":2,"fields":[["x1^^2","0"]],"q0":[0,0],"control":["1"]})";
  try {
    (void)parse_system_spec_text(bad_poly);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
    CHECK(e.column() == 4);
    CHECK(std::string(e.what()).find("fields[0][0]") != std::string::npos);
  }
  try {
    (void)parse_system_spec_text("{\"schema\": \"endpt-system/1\",\n  \"dimension\": ,\n}");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 16);
  }
  CHECK_THROWS_AS(parse_system_spec_text(
                      R"({"schema":"endpt-system/1","dimension":3,"fields":[["1","0","0"]],"q0":[0,0],"control":["1"]})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_system_spec_text(
                      R"({"schema":"endpt-system/1","dimension":2,"fields":[["x3","0"]],"q0":[0,0],"control":["1"]})"),
                  ParseError);
  CHECK_THROWS_AS(parse_system_spec_text(
                      R"({"schema":"endpt-system/1","dimension":2,"fields":[["1","0"]],"q0":[0,0],"control":["1","2"]})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_system_spec_text(R"({"schema":"endpt-system/9","builtin":"example-3"})"), ValidationError);
  CHECK_THROWS_AS(parse_system_spec_text(R"({"dimension": 2})"), ValidationError);
  CHECK_THROWS_AS(parse_system_spec_text(R"({"schema":"endpt-system/1","dimension":"two"})"), ValidationError);
  CHECK_THROWS_AS(parse_openness_mode("sometimes"), ValidationError);
}

TEST_CASE("property: spec text round-trips") {
  for (const std::string& text : {std::string(kToy), std::string(R"({"schema":"endpt-system/1","builtin":"example-2"})"),
                                  std::string(R"({"schema":"endpt-system/1","builtin":"example-3",
                                                  "perturbations":[["0","1"]],"probe_max_freq":4,
                                                  "tolerances":{"svd":1e-7}})")}) {
    const SystemSpec a = parse_system_spec_text(text, "src");
    const std::string printed = to_json(a).dump();
    const SystemSpec b = parse_system_spec_text(printed, "src");
    CHECK(a == b);
    CHECK(to_json(b).dump() == printed);
  }
}

TEST_CASE("report for example-3") {
  const auto rep = run_report(builtin_spec(3), RunFlags{});
  const json& r = rep.body;
  CHECK(r["schema"] == kReportSchema);
  CHECK(r["first_order"]["corank"] == 1);
  const auto l = r["first_order"]["cokernel"][0].get<std::vector<double>>();
  CHECK(std::abs(l[0]) < 1e-12);
  CHECK(std::abs(l[1]) < 1e-12);
  CHECK(std::abs(std::abs(l[2]) - 1.0) < 1e-12);
  CHECK(r["singularity"]["class"] == "strictly-singular");
  for (const auto& row : r["hessian_samples"]["values"]) CHECK(std::abs(row[0].get<double>()) <= 1e-10);
  CHECK(r["hessian_samples"]["count"] == 10);
  const json& v = r["perturbations"][0];
  CHECK(std::abs(v["hessian"][0].get<double>()) < 1e-12);
  CHECK(v["third"][0].get<double>() == doctest::Approx(15.0).epsilon(1e-9));
  for (const char* c : {"pmp", "goh", "third_order"}) {
    CHECK(r["conditions"][0][c]["holds"] == true);
    CHECK(r["conditions"][0][c]["max_violation"] == 0.0);
    CHECK(r["conditions"][0][c].contains("tolerance"));
    CHECK(r["conditions"][0][c].contains("grid_points"));
  }
  CHECK(r["openness"]["verdict"] == "certified");
  CHECK(r["openness"]["coverage"]["fraction"] == 1.0);
  CHECK(r["provenance"]["seed"] == RunFlags{}.seed);
  CHECK(r["provenance"]["tool_version"] == kToolVersion);
  REQUIRE(rep.coverage_csv.has_value());
  CHECK(std::count(rep.coverage_csv->begin(), rep.coverage_csv->end(), '\n') == 126);
}

TEST_CASE("report for example-2 and example-1") {
  const json r2 = run_report(builtin_spec(2), RunFlags{}).body;
  const json& v = r2["perturbations"][0];
  CHECK(v["in_domain"] == false);
  CHECK(v["third"][0].is_null());
  CHECK(v["third_unchecked"][0].get<double>() == doctest::Approx(9.0).epsilon(1e-9));
  CHECK(r2["openness"]["verdict"] == "not-certified");

  RunFlags off;
  off.openness = OpennessMode::off;
  const json r1 = run_report(builtin_spec(1), off).body;
  CHECK(r1["conditions"][0]["goh"]["holds"] == false);
  CHECK(r1["first_order"]["corank"] == 0);
  CHECK_FALSE(r1.contains("openness"));
}

TEST_CASE("report determinism modulo timestamp") {
  RunFlags f;
  f.seed = 7;
  const auto a = run_report(builtin_spec(3), f);
  const auto b = run_report(builtin_spec(3), f);
  CHECK(without_timestamp(a.body).dump() == without_timestamp(b.body).dump());
  CHECK(a.coverage_csv == b.coverage_csv);
  CHECK_FALSE(without_timestamp(a.body).contains("generated_at"));

  const auto c = cubic_report("[[[[1,0],[0,-1]],[[0,-1],[-1,0]]]]", f);
  const auto d = cubic_report("[[[[1,0],[0,-1]],[[0,-1],[-1,0]]]]", f);
  CHECK(without_timestamp(c.body) == without_timestamp(d.body));
}

TEST_CASE("cubic report") {
  // x^3 - 3 x y^2 and x^3.
  const json r = cubic_report("[[[[1,0],[0,-1]],[[0,-1],[-1,0]]]]", RunFlags{}).body;
  CHECK(r["regular_zero"]["found"] == true);
  CHECK(r["regular_zero"]["residual"].get<double>() <= 1e-10);
  const json n = cubic_report("[[[[1]]]]", RunFlags{}).body;
  CHECK(n["regular_zero"]["found"] == false);
  CHECK_THROWS_AS(cubic_report("[[[[1,", RunFlags{}), ValidationError);
}

TEST_CASE("numeric backend report skips higher orders") {
  // toy spec with a piecewise control: first-order sections only.
  const SystemSpec s = parse_system_spec_text(
      R"({"schema":"endpt-system/1","dimension":2,"fields":[["1","0"],["0","x1"]],"q0":[0,0],
          "control":["pw[(0,0.5,1),(0.5,1,-1)]","1"]})");
  RunFlags f;
  f.openness = OpennessMode::off;
  const json r = run_report(s, f).body;
  CHECK(r["system"]["flow_backend"] == "numeric");
  CHECK(r.contains("first_order"));
  CHECK_FALSE(r.contains("conditions"));
}

TEST_CASE("CLI exit codes and outputs") {
  const std::string good = temp_file("toy.json", kToy);
  const std::string out = std::string(ENDPT_TEST_TMP) + "/toy_report.json";
  CHECK(run_cli("analyze " + good + " --openness off --out " + out) == 0);
  std::ifstream in(out);
  const json r = json::parse(in);
  CHECK(r["schema"] == kReportSchema);

  const std::string bad =
      temp_file("bad.json", R"({"schema":"endpt-system/1","dimension":2,"fields":[["x1^^2","0"]],"q0":[0,0],"control":["1"]})");
  CHECK(run_cli("analyze " + bad) == 2);
  CHECK(run_cli("analyze builtin:example-0") == 2);
  CHECK(run_cli("analyze " + good + " --openness maybe") == 2);
  const std::string blow =
      temp_file("blow.json", R"({"schema":"endpt-system/1","dimension":1,"fields":[["x1^2"]],"q0":[1],"control":["10"]})");
  CHECK(run_cli("analyze " + blow + " --openness off") == 3);
  const std::string tensor = temp_file("t.json", "[[[[1,0],[0,-1]],[[0,-1],[-1,0]]]]");
  CHECK(run_cli("cubic " + tensor + " --seed 3") == 0);
  CHECK(run_cli("example 2 --openness off --grid 51 --svd-tol 1e-8 --probe-max-freq 4 --rk-step 1e-3") == 0);
}
