#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "mpmab/dynamics.hpp"
#include "mpmab/env.hpp"
#include "mpmab/estimator.hpp"

namespace mpmab {

class ChainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One player's component of a joint state. `utility` indexes the player's
/// finite utility set.
struct LocalState {
  Channel action = 0;
  int utility = 0;
  Mood mood = Mood::kDiscontent;

  friend bool operator==(const LocalState&, const LocalState&) = default;
};

using JointState = std::vector<LocalState>;

using TransitionMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// How a play's utility is read in the kernel.
struct UtilityModel {
  /// Probability that a player reads the nearest other nonzero estimate
  /// instead of the correct one. Zero gives exact utilities.
  double p_eps = 0.0;
};

inline constexpr std::size_t kDefaultStateCap = 100'000;

/// The matching dynamics of all players as one finite Markov chain.
///
/// Utilities are read as the nearest nonzero estimate to the true mean of
/// the realized occupancy, the same rule the players apply to their play
/// averages. Joint states are numbered in mixed radix with player 0 most
/// significant and, per player, (action, utility, mood) with mood fastest.
class ChainModel {
 public:
  ChainModel(const MeanRewardTable& table, std::vector<EstimateTable> estimates,
             std::size_t state_cap = kDefaultStateCap);

  /// Estimates equal to the true means, beta = N.
  static ChainModel exact(const MeanRewardTable& table,
                          std::size_t state_cap = kDefaultStateCap);

  std::size_t num_states() const { return num_states_; }
  int num_players() const { return table_.num_players(); }
  int num_channels() const { return table_.num_channels(); }

  /// Ascending utility set {nonzero estimates} ∪ {0} of `player`.
  const std::vector<double>& utilities(int player) const {
    return utilities_[static_cast<std::size_t>(player)];
  }

  JointState decode(std::size_t index) const;
  std::size_t encode(const JointState& state) const;
  /// Index of the joint state formed by the players' current states.
  std::size_t encode(const std::vector<PlayerState>& states) const;

  /// Utility each player reads under `profile` when nothing is misread.
  std::vector<UtilityReading> readings(const ActionProfile& profile) const;

  /// Everyone content, baseline profile `profile`, baselines aligned with
  /// the utilities that profile yields.
  std::size_t aligned_content_state(const ActionProfile& profile) const;
  bool all_discontent(std::size_t index) const;
  bool aligned_content(std::size_t index) const;

  /// Row-stochastic kernel at `eps` with experimentation exponent `exp_c`.
  TransitionMatrix build_kernel(double eps, double exp_c,
                                const UtilityModel& model = {}) const;

  std::string describe(std::size_t index) const;

 private:
  struct Outcome {
    LocalState next;
    double prob;
  };
  std::vector<Outcome> local_outcomes(int player, const LocalState& current,
                                      Channel action, const UtilityReading& exact,
                                      double eps, const UtilityModel& model) const;
  int utility_index(int player, double utility) const;

  MeanRewardTable table_;
  std::vector<EstimateTable> estimates_;
  std::vector<std::vector<double>> utilities_;
  std::vector<std::size_t> local_size_;
  std::vector<std::size_t> stride_;
  std::size_t num_states_ = 0;
};

/// Sanity check: max over rows of |row sum - 1|.
double max_row_sum_error(const TransitionMatrix& kernel);

/// Strongly connected components of the support digraph (Tarjan).
std::vector<std::vector<std::size_t>> strongly_connected_components(
    const TransitionMatrix& kernel);

/// Closed communicating classes, each sorted, ordered by smallest member.
std::vector<std::vector<std::size_t>> recurrence_classes(const TransitionMatrix& kernel);

struct StationaryResult {
  Eigen::VectorXd pi;
  /// ||pi P - pi||_1
  double residual = 0.0;
  bool direct = true;
  int iterations = 0;
};

struct StationaryOptions {
  std::size_t direct_limit = 10'000;
  double tolerance = 1e-12;
  int max_iterations = 1'000'000;
};

/// Solves pi = pi P. Requires a unique recurrent class.
StationaryResult stationary_distribution(const TransitionMatrix& kernel,
                                         const StationaryOptions& options = {});

struct StabilityRow {
  double eps = 0.0;
  double pi_optimal = 0.0;
  double pi_content = 0.0;  // all aligned-content singletons
  double pi_discontent = 0.0;
  double residual = 0.0;
  /// pi of every aligned-content singleton, in profile enumeration order.
  std::vector<double> pi_singletons;
};

struct StabilityReport {
  ActionProfile optimal_profile;
  std::vector<ActionProfile> profiles;
  std::vector<StabilityRow> rows;
  bool majority_reached = false;  // pi(z*) > 1/2 somewhere on the grid
};

StabilityReport stability_report(const ChainModel& model,
                                 const ActionProfile& optimal_profile,
                                 const std::vector<double>& eps_grid,
                                 double exp_c, const UtilityModel& utility = {});

}  // namespace mpmab
