#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpmab/chain.hpp"
#include "mpmab/config.hpp"
#include "mpmab/dynamics.hpp"
#include "mpmab/oracle.hpp"

namespace mpmab {

/// Everything needed to simulate one configuration.
struct Experiment {
  RunConfig config;
  Environment env;
  std::optional<Oracle> oracle;
  ResolvedSchedule schedule;
  /// Separation parameters handed to the players.
  double players_delta = 0.0;
  std::optional<double> players_nu_min;

  static Experiment prepare(const RunConfig& config);

  RunTrace run_seed(std::uint64_t seed, std::int64_t horizon) const;
};

/// Name of the environment variable holding the default output directory.
inline constexpr const char* kOutDirEnv = "MPMAB_OUT_DIR";

/// --out, then the config, then $MPMAB_OUT_DIR, then "./out".
std::filesystem::path resolve_out_dir(const std::optional<std::filesystem::path>& flag,
                                      const RunConfig& config);

/// Per-time-unit trace: time,epoch,phase,a_1..a_K,regret. Channels 1-based.
void write_trace_csv(const RunTrace& trace, int num_players, std::ostream& out);

nlohmann::json summary_json(const Experiment& exp, const RunTrace& trace,
                            std::uint64_t seed);

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::optional<ActionProfile> final_profile;
  bool final_optimal = false;
  double total_regret = 0.0;
  std::vector<RegretCheckpoint> checkpoints;
};

nlohmann::json aggregate_json(const Experiment& exp, const std::vector<SeedOutcome>& outcomes,
                              std::int64_t horizon);

SeedOutcome outcome_of(const Experiment& exp, const RunTrace& trace, std::uint64_t seed);

/// Runs every seed, writing one trace and one summary per seed plus an
/// aggregate summary and a manifest into `out_dir`.
std::vector<SeedOutcome> run_experiment(const Experiment& exp,
                                        const std::vector<std::uint64_t>& seeds,
                                        std::int64_t horizon,
                                        const std::filesystem::path& out_dir, int jobs);

enum class SweepParam { kEps, kSigma, kHorizon };

SweepParam parse_sweep_param(const std::string& name);
std::string to_string(SweepParam param);

/// One CSV row per (grid value, seed). Failed points are reported in the
/// error column and the sweep continues.
void run_sweep(const RunConfig& config, SweepParam param,
               const std::vector<double>& values,
               const std::vector<std::uint64_t>& seeds, std::int64_t horizon,
               std::ostream& out, int jobs);

/// Human-readable oracle report and its machine-readable twin.
std::string oracle_text(const RunConfig& config);
nlohmann::json oracle_json(const RunConfig& config);

struct ChainAnalysis {
  StabilityReport stability;
  std::vector<std::vector<std::size_t>> recurrent_classes;  // at eps = 0
  ChainModel model;
};

ChainAnalysis analyze_chain(const RunConfig& config, const std::vector<double>& eps_grid);

void write_stability_csv(const ChainAnalysis& analysis, std::ostream& out);
void write_recurrence_text(const ChainAnalysis& analysis, std::ostream& out);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace mpmab
