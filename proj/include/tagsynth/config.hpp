#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "tagsynth/limiter.hpp"
#include "tagsynth/llm.hpp"
#include "tagsynth/synthesis.hpp"

namespace tagsynth {

/// Everything a CLI run can be configured with. File layout:
///   {"seed": 0, "log_level": "info",
///    "synthesis": {...}, "perception": {...}, "modularity": {...},
///    "limiter": {...}, "provider": {...}}
/// Every section and key is optional; unknown keys are errors.
struct RunConfig {
  SynthesisConfig synthesis;  // owns perception and modularity params
  LimiterParams limiter;
  ProviderConfig provider;
  std::uint64_t seed = 0;
  std::string log_level = "info";  // trace|debug|info|warn|error|off

  void validate() const;  // throws ValidationError
};

/// Overlays `doc` onto `base`. Throws ValidationError naming the offending
/// key path (e.g. "synthesis.tau0") on unknown keys or wrong types.
RunConfig merge_run_config(RunConfig base, const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);  // defaults + file

nlohmann::json to_json(const RunConfig& config);

}  // namespace tagsynth
