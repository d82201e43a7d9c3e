#pragma once

// JSON run configuration: scenario, collection and training settings. A
// config may start from a named preset; every other field overrides it.
// Unknown keys and wrong types are rejected with the offending field path.

#include "lgvmpc/policy_learning.hpp"
#include "lgvmpc/sim_harness.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace lgvmpc::config {

struct RunConfig {
  sim::Scenario scenario = sim::preset("stationary-se");
  learning::CollectOptions collect;
  learning::TrainOptions train;
  std::string model_path;
  double metrics_window = 20.0;
};

// Throws Fault(kParse) with line/column for malformed JSON, and
// Fault(kConfig) naming the field for schema violations.
// A nonempty preset_override replaces the file's "preset" key.
RunConfig parse_config(const std::string& text, const std::string& source = "config",
                       const std::string& preset_override = {});
RunConfig load_config(const std::string& path, const std::string& preset_override = {});

// Canonical resolved form; the config hash is computed over its dump.
nlohmann::json to_json(const RunConfig& cfg);

std::uint64_t fnv1a64(const std::string& bytes);
std::string config_hash(const RunConfig& cfg);

// "config_hash=<hex> seed=<n>"
std::string meta_line(const RunConfig& cfg);

// Keeps collection and training settings in step with the scenario.
void sync_derived(RunConfig& cfg);

}  // namespace lgvmpc::config
