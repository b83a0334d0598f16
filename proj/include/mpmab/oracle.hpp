#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mpmab/env.hpp"

namespace mpmab {

struct MatchingSolution {
  ActionProfile optimal_profile;
  double j1 = 0.0;
  /// Largest system reward strictly below j1. Equals j1 when every profile
  /// attains the same value.
  double j2 = 0.0;
  double delta = 0.0;
  bool unique = false;
  /// Number of profiles attaining j1.
  std::uint64_t num_optimal = 0;
};

/// One (player, channel, n1, n2) pair that fails the separability bound.
struct SeparabilityViolation {
  int player = 0;
  Channel channel = 0;
  int occupancy_a = 0;  // 1-based
  int occupancy_b = 0;  // 1-based
  double gap = 0.0;
};

struct SeparabilityReport {
  /// Empty when no (j, m) has two nonzero occupancy means.
  std::optional<double> nu_min;
  double threshold = 0.0;
  bool passed = true;
  std::vector<SeparabilityViolation> offending;
};

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

/// Sum over players of mu_j(a_j, k(a_j)).
double system_reward(const MeanRewardTable& table, const ActionProfile& profile);

/// Minimum gap between distinct nonzero occupancy means of one
/// (player, channel). std::nullopt when no such pair exists.
std::optional<double> compute_nu_min(const MeanRewardTable& table);

/// Checks |mu_j(m,n1) - mu_j(m,n2)| >= 4 M c_sep exp((K-1)/(M-1)) sqrt(sigma^2 + eps2)
/// over all nonzero pairs. For M = 1 the exponent is taken as 0.
SeparabilityReport check_separability(const MeanRewardTable& table,
                                      double sigma, double c_sep, double eps2);

/// M^K or nullopt on overflow of the 64-bit range.
std::optional<std::uint64_t> profile_count(int num_players, int num_channels);

/// Advances `profile` to the next profile in lexicographic order (last
/// player fastest). Returns false after the last profile.
bool next_profile(ActionProfile& profile, int num_channels);

/// Brute-force ground truth over all M^K profiles.
class Oracle {
 public:
  explicit Oracle(const MeanRewardTable& table,
                  std::uint64_t enumeration_cap = kDefaultEnumerationCap);

  const MatchingSolution& solution() const { return solution_; }
  const MeanRewardTable& table() const { return table_; }

  double system_reward(const ActionProfile& profile) const {
    return mpmab::system_reward(table_, profile);
  }

  /// J1 minus the system reward of `profile`; never negative.
  double regret_increment(const ActionProfile& profile) const;

 private:
  MeanRewardTable table_;
  MatchingSolution solution_;
};

/// Solves the matching directly. Throws OracleError when M^K exceeds the cap.
MatchingSolution solve_matching(const MeanRewardTable& table,
                                std::uint64_t enumeration_cap = kDefaultEnumerationCap);

std::string format_profile(const ActionProfile& profile);

}  // namespace mpmab
