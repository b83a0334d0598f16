#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpmab/rng.hpp"

namespace mpmab {

/// Channel index, 0-based internally. Printed 1-based.
using Channel = int;

/// Joint action: entry j is the channel chosen by player j.
using ActionProfile = std::vector<Channel>;

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ground-truth mean rewards mu_j(m, k) for player j, channel m and
/// occupancy k in [1, N]. Means for k > N are zero.
class MeanRewardTable {
 public:
  MeanRewardTable() = default;

  /// `rows` holds one row per (j, m) in player-major order, each with N
  /// entries for occupancy 1..N. Throws ModelError if the table violates
  /// the model constraints (see validation_errors).
  MeanRewardTable(int num_players, int num_channels, int max_occupancy,
                  std::vector<std::vector<double>> rows);

  /// Constraint violations as human-readable messages; empty when valid.
  static std::vector<std::string> validation_errors(
      int num_players, int num_channels, int max_occupancy,
      const std::vector<std::vector<double>>& rows);

  int num_players() const { return num_players_; }
  int num_channels() const { return num_channels_; }
  int max_occupancy() const { return max_occupancy_; }

  /// mu_j(m, k); k >= 1, zero for k > N.
  double mean(int player, Channel channel, int occupancy) const;

  /// The N means of (player, channel) for occupancy 1..N.
  const std::vector<double>& row(int player, Channel channel) const;

  /// Copy with every mean multiplied by `factor` in (0, 1].
  MeanRewardTable scaled(double factor) const;

 private:
  void check_indices(int player, Channel channel) const;

  int num_players_ = 0;
  int num_channels_ = 0;
  int max_occupancy_ = 0;
  std::vector<std::vector<double>> rows_;
};

enum class NoiseKind { kTruncatedGaussian, kDeterministic };

NoiseKind parse_noise_kind(const std::string& text);
std::string to_string(NoiseKind kind);

struct RewardModel {
  double sigma = 0.0;
  NoiseKind kind = NoiseKind::kTruncatedGaussian;
};

/// Per-channel player counts k(m) of a profile.
std::vector<int> occupancy(const ActionProfile& profile, int num_channels);

bool is_valid_profile(const ActionProfile& profile, int num_players,
                      int num_channels);

/// The shared wireless medium. Players only ever see their own reward.
class Environment {
 public:
  Environment(MeanRewardTable table, RewardModel model);

  const MeanRewardTable& table() const { return table_; }
  const RewardModel& reward_model() const { return model_; }
  int num_players() const { return table_.num_players(); }
  int num_channels() const { return table_.num_channels(); }

  double true_mean(int player, Channel channel, int occupancy) const {
    return table_.mean(player, channel, occupancy);
  }

  /// Expected reward of each player under `profile`.
  std::vector<double> expected_rewards(const ActionProfile& profile) const;

  /// One reward per player for a single time unit. Rewards are clipped to
  /// [0, 1]; a zero mean yields exactly zero.
  std::vector<double> sample_rewards(const ActionProfile& profile,
                                     Rng& rng) const;

  /// Same as sample_rewards but writes into `out` (resized to K).
  void sample_rewards_into(const ActionProfile& profile, Rng& rng,
                           std::vector<double>& out) const;

  /// Draw a single reward around `mean`.
  double draw(double mean, Rng& rng) const;

 private:
  MeanRewardTable table_;
  RewardModel model_;
};

}  // namespace mpmab
