// Batch entry points: strict JSON configuration, the CLI subcommands, and
// report/field output.  Every run writes its resolved configuration next to
// its outputs so runs can be reproduced byte-for-byte.

#ifndef BALCONS_RUNNER_HPP
#define BALCONS_RUNNER_HPP

#include <string>

#include "json.hpp"

#include "balcons/core.hpp"
#include "balcons/solver.hpp"
#include "balcons/systems.hpp"
#include "balcons/transforms.hpp"

namespace balcons {

struct CommandResult {
  bool pass = true;
  nlohmann::json report;
};

// command: derive-system | solve | transform | verify | compare | pipeline.
// The configuration is validated against a strict schema (unknown keys are
// rejected).  Outputs land under out_dir.
CommandResult run_command(const std::string& command,
                          const nlohmann::json& config,
                          const std::string& out_dir);

// String-level wrapper used by the C API: applies dotted-path overrides
// ("solver.cfl=0.3") before dispatching, and returns the report as JSON text.
std::string run_command_json(const std::string& command,
                             const std::string& config_json,
                             const std::string& overrides_json,
                             const std::string& out_dir, bool* pass);

// Exposed for reuse and tests: builders from validated config fragments.
ConservationSystem system_from_config(const nlohmann::json& j);
GeneratorSpec transform_spec_from_config(const nlohmann::json& j);
TransformResult transform_from_config(const nlohmann::json& j,
                                      const ConservationSystem& sys);
SolverConfig solver_from_config(const nlohmann::json& j);
Field ic_from_config(const nlohmann::json& j);

}  // namespace balcons

#endif
