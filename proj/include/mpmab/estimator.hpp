#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mpmab/env.hpp"
#include "mpmab/rng.hpp"

namespace mpmab {

/// Rewards a single player observed on each channel during exploration.
/// Exact zeros (over-occupied channel) are not stored.
class SampleStore {
 public:
  explicit SampleStore(int num_channels = 0)
      : samples_(static_cast<std::size_t>(num_channels)) {}

  void append(Channel channel, double reward);

  int num_channels() const { return static_cast<int>(samples_.size()); }
  const std::vector<double>& samples(Channel channel) const {
    return samples_.at(static_cast<std::size_t>(channel));
  }
  std::size_t size(Channel channel) const { return samples(channel).size(); }
  /// Zero rewards seen on `channel` and dropped.
  std::size_t dropped_zeros(Channel channel) const {
    return zeros_.at(static_cast<std::size_t>(channel));
  }

 private:
  std::vector<std::vector<double>> samples_;
  std::vector<std::size_t> zeros_ = std::vector<std::size_t>(samples_.size(), 0);
};

/// Per-channel mean estimates indexed by occupancy level 1..beta (stored
/// 0-based). Nonzero prefix strictly decreasing, zero padded.
struct EstimateTable {
  int beta = 0;
  std::vector<std::vector<double>> levels;
  /// Channels that had no samples when the table was built.
  std::vector<bool> empty_channel;

  int num_channels() const { return static_cast<int>(levels.size()); }
  double at(Channel channel, int level) const {
    return levels[static_cast<std::size_t>(channel)][static_cast<std::size_t>(level)];
  }
  /// Estimates equal to a player's true means (row per channel, padded or
  /// truncated to beta).
  static EstimateTable exact(const MeanRewardTable& table, int player, int beta);
};

struct ClusterOptions {
  int max_iterations = 100;
  int restarts = 5;
  std::uint64_t seed = 0;
};

struct ClusterResult {
  /// Within-cluster means, sorted descending.
  std::vector<double> means;
  /// Within-cluster sum of squares of the returned clustering.
  double sse = 0.0;
  /// Lloyd objective after initialization and after each iteration, for the
  /// winning restart.
  std::vector<double> sse_history;
};

/// k-means++ seeding followed by Lloyd iterations on 1-D data, best of
/// `restarts`. Input order does not affect the result.
ClusterResult cluster_detailed(std::span<const double> samples, int beta,
                               const ClusterOptions& options = {});

std::vector<double> cluster(std::span<const double> samples, int beta,
                            const ClusterOptions& options = {});

/// Clusters every channel of `store` into at most beta levels.
EstimateTable rebuild_estimates(const SampleStore& store, int beta,
                                const ClusterOptions& options = {});

/// Uniform exploration choice.
inline Channel explore_channel(Rng& rng, int num_channels) {
  return rng.uniform_int(num_channels);
}

}  // namespace mpmab
