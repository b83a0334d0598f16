#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mpmab/chain.hpp"
#include "mpmab/dynamics.hpp"
#include "mpmab/env.hpp"
#include "mpmab/oracle.hpp"

namespace mpmab {

struct SeparabilityParams {
  double c_sep = 0.1;
  double eps2 = 0.0025;
};

struct ChainOptions {
  std::size_t state_cap = kDefaultStateCap;
  std::vector<double> eps_grid{0.3, 0.2, 0.1, 0.05};
  double p_eps = 0.0;
};

/// Parsed, validated experiment configuration.
struct RunConfig {
  MeanRewardTable table;
  RewardModel reward;
  ScheduleParams schedule;
  /// Lower bounds on delta and nu_min handed to the players; the oracle's
  /// exact values are used when absent.
  std::optional<double> known_delta;
  std::optional<double> known_nu_min;
  SeparabilityParams separability;
  std::uint64_t enumeration_cap = kDefaultEnumerationCap;
  ChainOptions chain;
  std::int64_t horizon = 1'000'000;
  std::vector<std::uint64_t> seeds{1};
  std::optional<std::filesystem::path> out_dir;
  int jobs = 1;
  /// The configuration text exactly as read.
  std::string source_text;
};

struct ValidationResult {
  std::optional<RunConfig> config;
  std::vector<std::string> errors;    // fatal
  std::vector<std::string> warnings;  // informational

  bool ok() const { return errors.empty() && config.has_value(); }
};

/// Parses JSON configuration text and checks every model and schedule
/// invariant, separability (warning) and oracle feasibility (warning).
ValidationResult validate_config(const std::string& text);

ValidationResult load_config(const std::filesystem::path& path);

}  // namespace mpmab
