#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "balcons/runner.hpp"
#include "balcons/verify.hpp"

using namespace balcons;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("runner_test") / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all("runner_test"); }
  std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json euler_system() {
  return json{{"kind", "euler"}, {"pressure", "U5*U1^0.4"}};
}

}  // namespace

TEST_CASE("unknown keys are rejected at every level") {
  TempDir dir("strict");
  json config{{"system", euler_system()}, {"mystery", 1}};
  CHECK_THROWS_AS(run_command("derive-system", config, dir.str()), Error);

  json config2{{"system", {{"kind", "euler"}, {"pressure", "U1"}, {"oops", 2}}},
               {"transform", {{"family", "XI10"}, {"a", 1.0},
                              {"payload", {{"f", "x1"}}}}}};
  CHECK_THROWS_AS(run_command("derive-system", config2, dir.str()), Error);
}

TEST_CASE("derive-system: gravity specialization exports p15 = g*u1") {
  TempDir dir("derive");
  json config;
  config["system"] = euler_system();
  config["transform"] = {{"family", "EULER_COMPOSED"},
                         {"a", 1.0},
                         {"payload", {{"mode", "profiles"},
                                      {"m3", "4.905*x1^2"}}}};
  const CommandResult res = run_command("derive-system", config, dir.str());
  CHECK(res.pass);
  const json report = json::parse(slurp(dir.path / "derived_system.json"));
  CHECK(report["elements"]["p15"] == "9.8100000000000005*u1");
  CHECK(report["elements"]["p16"] == "0");
  CHECK(fs::exists(dir.path / "derived_system.txt"));
}

TEST_CASE("derive-system: constant shift in u5 exports a constant p16") {
  TempDir dir("derive2");
  json config;
  config["system"] = euler_system();
  config["transform"] = {{"family", "XI10"},
                         {"a", 0.37},
                         {"payload", {{"f", "x1"}}}};
  const CommandResult res = run_command("derive-system", config, dir.str());
  const json report = json::parse(slurp(dir.path / "derived_system.json"));
  CHECK(report["elements"]["p16"] == "0.37");
  CHECK(report["elements"]["p13"] == "0");
}

TEST_CASE("derive-system: numeric-only transforms are refused") {
  TempDir dir("refuse");
  json config;
  config["system"] = euler_system();
  config["transform"] = {{"family", "XI2"},
                         {"a", 0.1},
                         {"payload", {{"f", "1 + 0.2*x2"}}}};
  CHECK_THROWS_AS(run_command("derive-system", config, dir.str()), Error);
}

TEST_CASE("solve writes fields and reruns byte-identically") {
  json config;
  config["system"] = euler_system();
  config["ic"] = {{"kind", "vortex"}, {"center", {0.0, 0.0}},
                  {"strength", 1.0}, {"background", {0.3, 0.0}},
                  {"gamma", 1.4}};
  config["solver"] = {{"cells", {12, 12, 1}},
                      {"domain", {{"lo", {-5.0, -5.0, -1.0}},
                                  {"hi", {5.0, 5.0, 1.0}}}},
                      {"end_time", 0.25}};

  fs::remove_all("runner_test");
  fs::create_directories("runner_test/a");
  fs::create_directories("runner_test/b");
  run_command("solve", config, "runner_test/a");
  run_command("solve", config, "runner_test/b");
  const std::string csv_a = slurp("runner_test/a/fields/autonomous/snap_0001.csv");
  const std::string csv_b = slurp("runner_test/b/fields/autonomous/snap_0001.csv");
  CHECK(csv_a == csv_b);
  CHECK(fs::exists("runner_test/a/resolved-config.json"));
  fs::remove_all("runner_test");
}

TEST_CASE("verify command runs map checks and reports") {
  TempDir dir("verify");
  json config;
  config["transform"] = {{"family", "XI9"},
                         {"a", 0.4},
                         {"payload", {{"f", "x2 + 2*x3"}}}};
  config["verify"] = {
      {"seed", 7},
      {"checks", json::array({json{{"type", "identity"}, {"tolerance", 1e-12}},
                              json{{"type", "round-trip"}, {"tolerance", 1e-10}},
                              json{{"type", "group-law"},
                                   {"b", 0.25},
                                   {"tolerance", 1e-10}},
                              json{{"type", "closed-vs-flow"},
                                   {"samples", 20},
                                   {"tolerance", 1e-8}}})}};
  const CommandResult res = run_command("verify", config, dir.str());
  CHECK(res.pass);
  CHECK(fs::exists(dir.path / "reports" / "verify.json"));
  CHECK(fs::exists(dir.path / "reports" / "verify.txt"));
  const json report = json::parse(slurp(dir.path / "reports" / "verify.json"));
  CHECK(report["checks"].size() == 4);
  for (const auto& c : report["checks"]) CHECK(c["pass"].get<bool>());
}

TEST_CASE("pipeline with the identity transform has zero route difference") {
  TempDir dir("pipeline");
  json config;
  config["system"] = euler_system();
  config["transform"] = {{"family", "EULER_COMPOSED"},
                         {"a", 0.0},
                         {"payload", {{"mode", "profiles"}}}};
  config["ic"] = {{"kind", "vortex"}, {"center", {0.0, 0.0}},
                  {"strength", 1.0}, {"background", {0.0, 0.0}},
                  {"gamma", 1.4}};
  config["solver"] = {{"cells", {12, 12, 1}},
                      {"domain", {{"lo", {-5.0, -5.0, -1.0}},
                                  {"hi", {5.0, 5.0, 1.0}}}},
                      {"end_time", 0.2}};
  config["pipeline"] = {
      {"residual", {{"points", 30}, {"h0", 4e-3},
                    {"box", {{"x_lo", {0.0, -2.0, -2.0, -0.5}},
                             {"x_hi", {0.2, 2.0, 2.0, 0.5}}}}}},
      {"splitting", {{"balance", "induced"}, {"threshold", 1e-14}}}};
  const CommandResult res = run_command("pipeline", config, dir.str());
  CHECK(res.pass);
  const json report = json::parse(slurp(dir.path / "reports" / "pipeline.json"));
  bool found = false;
  for (const auto& c : report["checks"])
    if (c["name"] == "two-route-difference") {
      CHECK(c["value"].get<double>() == 0.0);
      found = true;
    }
  CHECK(found);
  CHECK(fs::exists(dir.path / "fields" / "autonomous" / "meta.json"));
  CHECK(fs::exists(dir.path / "fields" / "splitting" / "meta.json"));
  CHECK(fs::exists(dir.path / "reports" / "convergence.csv"));
}

TEST_CASE("compare command on two field dumps") {
  TempDir dir("compare");
  json config;
  config["system"] = euler_system();
  config["ic"] = {{"kind", "constant"}, {"value", {1.0, 0.0, 0.0, 0.0, 1.0}}};
  config["solver"] = {{"cells", {8, 1, 1}},
                      {"domain", {{"lo", {0.0, 0.0, 0.0}},
                                  {"hi", {1.0, 1.0, 1.0}}}},
                      {"end_time", 0.1}};
  run_command("solve", config, (dir.path / "run1").string());
  config["ic"]["value"] = {1.5, 0.0, 0.0, 0.0, 1.0};
  run_command("solve", config, (dir.path / "run2").string());

  json cconf;
  cconf["compare"] = {
      {"a_dir", (dir.path / "run1" / "fields" / "autonomous").string()},
      {"b_dir", (dir.path / "run2" / "fields" / "autonomous").string()},
      {"norm", "Linf"}};
  const CommandResult res = run_command("compare", cconf, dir.str());
  const json report = json::parse(slurp(dir.path / "reports" / "compare.json"));
  CHECK(report["value"].get<double>() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(res.pass);
}

TEST_CASE("solve runs the rotating balance route") {
  TempDir dir("balance");
  json config;
  config["balance"] = {{"kind", "rotating-gravity"},
                       {"omega", 1.0},
                       {"g", 0.0},
                       {"pressure", "U5*U1^0.4"}};
  config["ic"] = {{"kind", "constant"}, {"value", {1.0, 0.3, 0.0, 0.0, 1.0}}};
  config["solver"] = {{"cells", {1, 1, 1}},
                      {"domain", {{"lo", {-1.0, -1.0, -1.0}},
                                  {"hi", {1.0, 1.0, 1.0}}}},
                      {"end_time", 0.5},
                      {"max_dt", 0.01},
                      {"wave_speed_bound", 1.0}};
  const CommandResult res = run_command("solve", config, dir.str());
  CHECK(res.pass);
  CHECK(res.report["route"] == "balance");
  CHECK(fs::exists(dir.path / "fields" / "balance" / "meta.json"));
}

TEST_CASE("transform command samples the pushed-forward surface") {
  TempDir dir("push");
  json config;
  config["system"] = euler_system();
  config["transform"] = {{"family", "XI11"},
                         {"a", 0.5},
                         {"payload", {{"g", {"1", "2", "3", "4"}}}}};
  config["ic"] = {{"kind", "constant"}, {"value", {1.0, 0.0, 0.0, 0.0, 1.0}}};
  config["solver"] = {{"cells", {4, 4, 1}},
                      {"domain", {{"lo", {0.0, 0.0, 0.0}},
                                  {"hi", {1.0, 1.0, 1.0}}}},
                      {"end_time", 1.0},
                      {"snapshot_interval", 0.5}};
  const CommandResult res = run_command("transform", config, dir.str());
  CHECK(res.pass);
  CHECK(res.report["snapshots"] == 3);
  const Field f = read_field_csv((dir.path / "fields" / "pushforward").string());
  const Vec5 u = f.cell_value(0, 0, 0, 0);
  CHECK(u[0] == doctest::Approx(1.5));   // 1 + a*g1
  CHECK(u[3] == doctest::Approx(2.0));   // 0 + a*g4
}

TEST_CASE("dotted-path overrides reach nested keys") {
  TempDir dir("override");
  json config;
  config["system"] = euler_system();
  config["transform"] = {{"family", "XI10"},
                         {"a", 0.1},
                         {"payload", {{"f", "x1"}}}};
  bool pass = false;
  const std::string report_text = run_command_json(
      "derive-system", config.dump(), R"({"transform.a": 0.5})", dir.str(),
      &pass);
  const json report = json::parse(report_text);
  CHECK(report["a"].get<double>() == 0.5);
  CHECK(report["elements"]["p16"] == "0.5");
}
