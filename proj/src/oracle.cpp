#include "mpmab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mpmab {

double system_reward(const MeanRewardTable& table, const ActionProfile& profile) {
  if (!is_valid_profile(profile, table.num_players(), table.num_channels()))
    throw std::invalid_argument("invalid action profile");
  const auto counts = occupancy(profile, table.num_channels());
  double total = 0.0;
  for (std::size_t j = 0; j < profile.size(); ++j)
    total += table.mean(static_cast<int>(j), profile[j], counts[profile[j]]);
  return total;
}

std::optional<double> compute_nu_min(const MeanRewardTable& table) {
  std::optional<double> best;
  for (int j = 0; j < table.num_players(); ++j) {
    for (Channel m = 0; m < table.num_channels(); ++m) {
      const auto& row = table.row(j, m);
      for (std::size_t a = 0; a < row.size(); ++a) {
        if (row[a] == 0.0) continue;
        for (std::size_t b = a + 1; b < row.size(); ++b) {
          if (row[b] == 0.0) continue;
          const double gap = std::abs(row[a] - row[b]);
          if (!best || gap < *best) best = gap;
        }
      }
    }
  }
  return best;
}

SeparabilityReport check_separability(const MeanRewardTable& table,
                                      double sigma, double c_sep, double eps2) {
  if (!(c_sep > 0.0)) throw std::invalid_argument("c_sep must be positive");
  if (!(eps2 > 0.0 && eps2 < 1.0))
    throw std::invalid_argument("eps2 must lie in (0,1)");
  const int K = table.num_players();
  const int M = table.num_channels();
  const double exponent = M > 1 ? static_cast<double>(K - 1) / (M - 1) : 0.0;

  SeparabilityReport report;
  report.threshold =
      4.0 * M * c_sep * std::exp(exponent) * std::sqrt(sigma * sigma + eps2);
  report.nu_min = compute_nu_min(table);
  for (int j = 0; j < K; ++j) {
    for (Channel m = 0; m < M; ++m) {
      const auto& row = table.row(j, m);
      for (std::size_t a = 0; a < row.size(); ++a) {
        if (row[a] == 0.0) continue;
        for (std::size_t b = a + 1; b < row.size(); ++b) {
          if (row[b] == 0.0) continue;
          const double gap = std::abs(row[a] - row[b]);
          if (gap < report.threshold) {
            report.offending.push_back({j, m, static_cast<int>(a) + 1,
                                        static_cast<int>(b) + 1, gap});
          }
        }
      }
    }
  }
  report.passed = report.offending.empty();
  return report;
}

std::optional<std::uint64_t> profile_count(int num_players, int num_channels) {
  std::uint64_t count = 1;
  for (int j = 0; j < num_players; ++j) {
    if (count > UINT64_MAX / static_cast<std::uint64_t>(num_channels))
      return std::nullopt;
    count *= static_cast<std::uint64_t>(num_channels);
  }
  return count;
}

bool next_profile(ActionProfile& profile, int num_channels) {
  for (auto i = profile.size(); i-- > 0;) {
    if (++profile[i] < num_channels) return true;
    profile[i] = 0;
  }
  return false;
}

MatchingSolution solve_matching(const MeanRewardTable& table,
                                std::uint64_t enumeration_cap) {
  const auto count = profile_count(table.num_players(), table.num_channels());
  if (!count || *count > enumeration_cap) {
    std::ostringstream os;
    os << "instance too large for oracle: M^K = " << table.num_channels()
       << "^" << table.num_players() << " exceeds enumeration cap "
       << enumeration_cap;
    throw OracleError(os.str());
  }

  ActionProfile profile(static_cast<std::size_t>(table.num_players()), 0);
  MatchingSolution sol;
  sol.optimal_profile = profile;
  sol.j1 = -1.0;
  std::optional<double> below;  // best value strictly below j1
  do {
    const double value = system_reward(table, profile);
    if (value > sol.j1) {
      if (sol.j1 >= 0.0) below = sol.j1;
      sol.j1 = value;
      sol.optimal_profile = profile;
      sol.num_optimal = 1;
    } else if (value == sol.j1) {
      ++sol.num_optimal;
    } else if (!below || value > *below) {
      below = value;
    }
  } while (next_profile(profile, table.num_channels()));

  sol.j2 = below.value_or(sol.j1);
  sol.unique = sol.num_optimal == 1;
  sol.delta = (sol.j1 - sol.j2) /
              (2.0 * table.num_channels() * table.max_occupancy());
  return sol;
}

Oracle::Oracle(const MeanRewardTable& table, std::uint64_t enumeration_cap)
    : table_(table), solution_(solve_matching(table, enumeration_cap)) {}

double Oracle::regret_increment(const ActionProfile& profile) const {
  return std::max(0.0, solution_.j1 - system_reward(profile));
}

std::string format_profile(const ActionProfile& profile) {
  std::string out = "(";
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(profile[i] + 1);
  }
  return out + ")";
}

}  // namespace mpmab
