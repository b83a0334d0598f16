#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mpmab/env.hpp"
#include "mpmab/estimator.hpp"
#include "mpmab/oracle.hpp"
#include "mpmab/rng.hpp"

namespace mpmab {

enum class Mood : std::uint8_t { kContent, kDiscontent };

inline char mood_char(Mood m) { return m == Mood::kContent ? 'C' : 'D'; }

/// One player's trial-and-error state [baseline action, baseline utility,
/// mood] plus the per-epoch content counters F_j(m).
struct PlayerState {
  Channel baseline_action = 0;
  double baseline_utility = 0.0;
  /// Estimate level (0-based) that produced baseline_utility, -1 if none.
  int baseline_level = -1;
  Mood mood = Mood::kDiscontent;
  std::vector<std::uint64_t> content_counts;
};

/// Protocol tunables. T0 and c_eps may be left unset and derived from the
/// instance (see resolve_schedule).
struct ScheduleParams {
  std::optional<std::int64_t> T0;
  double c2 = 10.0;
  double c3 = 100.0;
  std::optional<std::int64_t> c_eps;
  double delta = 0.5;
  double rho = 0.5;
  double eps = 0.1;
  /// Experimentation exponent; must exceed M*N. Defaults to M*N + 1.
  std::optional<double> exp_c;
  /// Cluster count; defaults to N.
  std::optional<int> beta;
  /// Reset every player to the initial discontent state at the start of
  /// each matching phase instead of carrying the state over.
  bool reset_each_epoch = false;
};

/// ScheduleParams with every optional field filled in.
struct ResolvedSchedule {
  std::int64_t T0 = 0;
  double c2 = 0.0;
  double c3 = 0.0;
  std::int64_t c_eps = 1;
  double delta = 0.0;
  double rho = 0.0;
  double eps = 0.0;
  double exp_c = 0.0;
  int beta = 1;
  bool reset_each_epoch = false;

  /// eps^exp_c, the per-play experimentation mass of a content player.
  double experiment_prob() const;
};

/// Floor applied to eps^c when deriving c_eps.
inline constexpr double kExperimentFloor = 1e-12;

/// Smallest c_eps with c_eps >= 2 ln(2 / eps^c) / (gap_delta + nu_min)^2.
/// A missing nu_min contributes zero.
std::int64_t lemma_play_length(double eps, double exp_c, double gap_delta,
                               std::optional<double> nu_min);

/// Exploration budget per epoch: ceil(32 sigma^2 / gap_delta^2 * ln(4 K M N)),
/// at least 16 * M.
std::int64_t default_exploration_length(double sigma, double gap_delta,
                                        int K, int M, int N);

/// Fills derived fields. `gap_delta` and `nu_min` are the (lower bounds on
/// the) separation parameters known to the players.
ResolvedSchedule resolve_schedule(const ScheduleParams& params,
                                  const MeanRewardTable& table, double sigma,
                                  double gap_delta, std::optional<double> nu_min);

/// Range checks shared by config validation and the simulator.
std::vector<std::string> schedule_errors(const ScheduleParams& params, int M,
                                         int N);

struct EpochPlan {
  int epoch = 1;
  std::int64_t explore_len = 0;
  std::int64_t matching_plays = 0;
  /// First counted play (1-based).
  std::int64_t count_start = 1;
  std::int64_t exploit_len = 0;
};

EpochPlan make_epoch_plan(int epoch, const ResolvedSchedule& schedule);

/// Probability of each channel under the content/discontent action rule.
std::vector<double> action_probabilities(const PlayerState& state,
                                         int num_channels,
                                         double experiment_prob);

Channel choose_action(const PlayerState& state, int num_channels,
                      double experiment_prob, Rng& rng);

/// Each player's average reward over one play of `c_eps` time units with
/// the joint profile held fixed.
std::vector<double> play_and_measure(const Environment& env,
                                     const ActionProfile& profile,
                                     std::int64_t c_eps, Rng& rng);

struct UtilityReading {
  /// Inferred occupancy level (0-based), -1 when no nonzero estimate exists.
  int level = -1;
  double utility = 0.0;
};

/// Nearest nonzero estimate to the observed average; ties go to the
/// smaller level.
UtilityReading utility_from_estimate(const EstimateTable& estimates,
                                     Channel channel, double observed);

/// Probability eps^(1 - u) of becoming content with utility u.
double acceptance_probability(double eps, double utility);

/// State update after a play. Returns true when the player is content
/// after the update.
bool update_state(PlayerState& state, Channel action,
                  const UtilityReading& reading, double eps, Rng& rng);

/// argmax of the content counters, ties to the smallest channel.
/// Returns nullopt when every counter is zero.
std::optional<Channel> argmax_counts(const std::vector<std::uint64_t>& counts);

/// Channel with the largest level-1 estimate, ties to the smallest.
Channel best_single_occupancy_channel(const EstimateTable& estimates);

/// A protocol participant. Holds only private information: its own random
/// source, samples, estimates and state.
class Player {
 public:
  Player(int id, int num_channels, int beta, std::uint64_t seed);

  int id() const { return id_; }
  const PlayerState& state() const { return state_; }
  const EstimateTable& estimates() const { return estimates_; }
  const SampleStore& samples() const { return samples_; }

  Channel explore();
  void observe_exploration(Channel channel, double reward);
  void rebuild(std::uint64_t cluster_seed);
  void set_estimates(EstimateTable estimates);

  /// Clears counters; resets or carries over the state. A carried-over
  /// baseline utility is refreshed from the current estimates.
  void begin_matching(bool reset);
  Channel choose(const ResolvedSchedule& schedule);
  /// Processes one play. Increments F(action) if `counted` and the player
  /// ends the play content.
  void observe_play(Channel action, double observed,
                    const ResolvedSchedule& schedule, bool counted);

  /// Exploitation channel. Sets `used_fallback` when no play was counted
  /// as content.
  Channel exploit_action(bool* used_fallback = nullptr) const;

  /// Direct state override, used by analysis code.
  void set_state(const PlayerState& state);

 private:
  int id_;
  int num_channels_;
  Rng rng_;
  SampleStore samples_;
  EstimateTable estimates_;
  PlayerState state_;
};

/// Called after every play with the 1-based play index, the joint profile
/// and the players (post-update).
using PlayObserver = std::function<void(std::int64_t, const ActionProfile&,
                                        const std::vector<Player>&)>;

struct MatchingPhaseResult {
  std::vector<ActionProfile> profiles;  // one per executed play
  std::int64_t plays_executed = 0;
};

/// Runs up to `max_plays` plays (all when unset) of the matching phase.
MatchingPhaseResult run_matching_phase(std::vector<Player>& players,
                                       const Environment& env,
                                       const EpochPlan& plan,
                                       const ResolvedSchedule& schedule,
                                       Rng& env_rng,
                                       const PlayObserver& observer = {},
                                       std::optional<std::int64_t> max_plays = {},
                                       bool record_profiles = true);

enum class Phase : std::uint8_t { kExploration, kMatching, kExploitation };

std::string to_string(Phase phase);

/// Consecutive time units sharing one profile.
struct TraceSegment {
  std::int64_t start = 1;  // 1-based time of the first unit
  std::int64_t length = 0;
  int epoch = 1;
  Phase phase = Phase::kExploration;
  ActionProfile profile;
  double regret_per_unit = 0.0;
};

struct EpochRecord {
  EpochPlan plan;
  std::int64_t start = 1;
  bool completed = false;
  bool matching_completed = false;
  ActionProfile exploit_profile;
  std::vector<bool> used_fallback;
  std::vector<std::vector<std::uint64_t>> content_counts;
  std::vector<EstimateTable> estimates;
};

struct RegretCheckpoint {
  std::int64_t time = 0;
  double cumulative = 0.0;
};

struct RunTrace {
  std::int64_t horizon = 0;
  bool has_regret = false;
  /// T ended before the first epoch finished.
  bool truncated_prefix = false;
  std::vector<TraceSegment> segments;
  std::vector<EpochRecord> epochs;
  /// Cumulative regret at powers of two up to the horizon, then at T.
  std::vector<RegretCheckpoint> checkpoints;
  double regret_exploration = 0.0;
  double regret_matching = 0.0;
  double regret_exploitation = 0.0;

  double total_regret() const {
    return regret_exploration + regret_matching + regret_exploitation;
  }
  /// Last epoch whose three phases all finished within the horizon.
  const EpochRecord* final_completed_epoch() const;
  /// Cumulative regret after `time` units, recomputed from segments.
  double cumulative_regret(std::int64_t time) const;
};

/// Runs the full epoch protocol for `horizon` time units. Regret is
/// reported only when `oracle` is given.
RunTrace run_horizon(const Environment& env, const Oracle* oracle,
                     const ResolvedSchedule& schedule, std::int64_t horizon,
                     std::uint64_t seed);

}  // namespace mpmab
