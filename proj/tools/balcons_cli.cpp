// balcons command-line tool.  Thin front-end over the shared C API: parses
// flags, reads the JSON config, forwards dotted-path overrides, and prints
// the returned report.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "balcons.h"

namespace {

int run(const std::string& command, const std::string& config_path,
        const std::vector<std::string>& sets, const std::string& out_dir,
        long long seed, bool quiet) {
  std::string config_text = "{}";
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot open config file '" << config_path << "'\n";
      return 2;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    config_text = ss.str();
  }

  // Collect --set key=value pairs (values parsed as JSON when possible) and
  // the --seed shortcut into one overrides object.
  nlohmann::json overrides = nlohmann::json::object();
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
      return 2;
    }
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
    overrides[key] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
  }
  if (seed >= 0) overrides["seed"] = seed;
  const std::string overrides_text = overrides.empty() ? "" : overrides.dump();

  char* report = nullptr;
  int pass = 0;
  const bc_status status =
      bc_run_command(command.c_str(), config_text.c_str(),
                     overrides_text.empty() ? nullptr : overrides_text.c_str(),
                     out_dir.c_str(), &report, &pass);
  if (status != BC_OK) {
    std::cerr << "error: " << bc_last_error() << "\n";
    return 2;
  }
  if (!quiet && report) std::cout << report << "\n";
  bc_string_free(report);
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"balcons: balance laws <-> autonomous conservation laws"};
  app.set_version_flag("--version", bc_version());
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::vector<std::string> sets;
  long long seed = -1;
  bool quiet = false;

  const std::vector<std::string> commands = {"derive-system", "solve",
                                             "transform",     "verify",
                                             "compare",       "pipeline"};
  std::string chosen;
  for (const std::string& name : commands) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " command");
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--set", sets,
                    "dotted-path override, e.g. solver.cfl=0.3 (repeatable)");
    sub->add_option("--out", out_dir, "output directory (default: out)");
    sub->add_option("--seed", seed, "override the sampling seed");
    sub->add_flag("--quiet", quiet, "suppress the report on stdout");
    sub->callback([&chosen, name] { chosen = name; });
  }

  CLI11_PARSE(app, argc, argv);
  return run(chosen, config_path, sets, out_dir, seed, quiet);
}
