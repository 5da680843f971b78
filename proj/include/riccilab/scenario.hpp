#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "riccilab/errors.hpp"

namespace riccilab {

/// Malformed scenario or a missing input it refers to; path() names the
/// offending file or key.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string path)
      : Error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

struct ScenarioOutcome {
  std::string name;
  std::string config_hash;
  /// holds | violated
  std::string verdict;
  std::string flow_status;
  std::filesystem::path report;
  std::filesystem::path manifest;
  /// Data files written, relative to the output directory, in write order.
  std::vector<std::string> outputs;
};

/// Runs build -> flow -> monitors -> checks as described by the JSON text.
/// Relative paths inside the config resolve against `base_dir`. Everything
/// except timestamps.json is a deterministic function of the config and its
/// inputs.
ScenarioOutcome run_scenario_text(const std::string& config_text, const std::filesystem::path& base_dir,
                                  const std::filesystem::path& out_dir, int jobs = 1);

ScenarioOutcome run_scenario(const std::filesystem::path& config_file, const std::filesystem::path& out_dir,
                             int jobs = 1);

/// 64-bit FNV-1a of the canonical (key-sorted, compact) form of the config.
std::string config_hash(const std::string& config_text);

}  // namespace riccilab
