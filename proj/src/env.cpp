#include "mpmab/env.hpp"

#include <algorithm>
#include <sstream>

namespace mpmab {

std::vector<std::string> MeanRewardTable::validation_errors(
    int num_players, int num_channels, int max_occupancy,
    const std::vector<std::vector<double>>& rows) {
  std::vector<std::string> errors;
  if (num_players < 1) errors.push_back("instance.K: must be positive");
  if (num_channels < 1) errors.push_back("instance.M: must be positive");
  if (max_occupancy < 1) errors.push_back("instance.N: must be positive");
  if (!errors.empty()) return errors;

  if (static_cast<long long>(num_players) >
      static_cast<long long>(num_channels) * max_occupancy) {
    std::ostringstream os;
    os << "instance.K: K <= M*N violated (" << num_players << " > "
       << num_channels << "*" << max_occupancy << ")";
    errors.push_back(os.str());
  }
  const auto expected_rows =
      static_cast<std::size_t>(num_players) * static_cast<std::size_t>(num_channels);
  if (rows.size() != expected_rows) {
    std::ostringstream os;
    os << "instance.mu: expected " << expected_rows << " rows (K*M), got "
       << rows.size();
    errors.push_back(os.str());
    return errors;
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto j = r / num_channels + 1;
    const auto m = r % num_channels + 1;
    std::ostringstream where;
    where << "instance.mu[" << r << "] (player " << j << ", channel " << m << ")";
    const auto& row = rows[r];
    if (row.size() != static_cast<std::size_t>(max_occupancy)) {
      errors.push_back(where.str() + ": expected N entries");
      continue;
    }
    bool seen_zero = false;
    for (std::size_t k = 0; k < row.size(); ++k) {
      const double v = row[k];
      if (v == 0.0) {
        seen_zero = true;
        continue;
      }
      if (!(v > 0.0 && v < 1.0)) {
        std::ostringstream os;
        os << where.str() << ": nonzero mean " << v << " at k=" << k + 1
           << " outside (0,1)";
        errors.push_back(os.str());
      } else if (seen_zero) {
        std::ostringstream os;
        os << where.str() << ": nonzero mean at k=" << k + 1
           << " after a zero mean";
        errors.push_back(os.str());
      } else if (k > 0 && !(v < row[k - 1])) {
        std::ostringstream os;
        os << where.str() << ": means must strictly decrease in occupancy (k="
           << k << " -> " << k + 1 << ")";
        errors.push_back(os.str());
      }
    }
  }
  return errors;
}

MeanRewardTable::MeanRewardTable(int num_players, int num_channels,
                                 int max_occupancy,
                                 std::vector<std::vector<double>> rows)
    : num_players_(num_players),
      num_channels_(num_channels),
      max_occupancy_(max_occupancy),
      rows_(std::move(rows)) {
  auto errors = validation_errors(num_players, num_channels, max_occupancy, rows_);
  if (!errors.empty()) {
    std::string msg = "invalid mean reward table:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ModelError(msg);
  }
}

void MeanRewardTable::check_indices(int player, Channel channel) const {
  if (player < 0 || player >= num_players_)
    throw std::out_of_range("player index out of range");
  if (channel < 0 || channel >= num_channels_)
    throw std::out_of_range("channel index out of range");
}

double MeanRewardTable::mean(int player, Channel channel, int occupancy) const {
  check_indices(player, channel);
  if (occupancy < 1) throw std::out_of_range("occupancy must be >= 1");
  if (occupancy > max_occupancy_) return 0.0;
  return rows_[static_cast<std::size_t>(player) * num_channels_ + channel]
              [occupancy - 1];
}

const std::vector<double>& MeanRewardTable::row(int player,
                                                Channel channel) const {
  check_indices(player, channel);
  return rows_[static_cast<std::size_t>(player) * num_channels_ + channel];
}

MeanRewardTable MeanRewardTable::scaled(double factor) const {
  if (!(factor > 0.0 && factor <= 1.0))
    throw std::invalid_argument("scale factor must be in (0,1]");
  auto rows = rows_;
  for (auto& r : rows)
    for (auto& v : r) v *= factor;
  return MeanRewardTable(num_players_, num_channels_, max_occupancy_,
                         std::move(rows));
}

NoiseKind parse_noise_kind(const std::string& text) {
  if (text == "truncated-gaussian") return NoiseKind::kTruncatedGaussian;
  if (text == "deterministic") return NoiseKind::kDeterministic;
  throw std::invalid_argument("unknown noise_kind '" + text + "'");
}

std::string to_string(NoiseKind kind) {
  return kind == NoiseKind::kDeterministic ? "deterministic"
                                           : "truncated-gaussian";
}

std::vector<int> occupancy(const ActionProfile& profile, int num_channels) {
  std::vector<int> counts(static_cast<std::size_t>(num_channels), 0);
  for (Channel a : profile) ++counts[static_cast<std::size_t>(a)];
  return counts;
}

bool is_valid_profile(const ActionProfile& profile, int num_players,
                      int num_channels) {
  if (profile.size() != static_cast<std::size_t>(num_players)) return false;
  return std::all_of(profile.begin(), profile.end(), [&](Channel a) {
    return a >= 0 && a < num_channels;
  });
}

Environment::Environment(MeanRewardTable table, RewardModel model)
    : table_(std::move(table)), model_(model) {
  if (!(model_.sigma >= 0.0))
    throw ModelError("reward.sigma must be nonnegative");
}

std::vector<double> Environment::expected_rewards(
    const ActionProfile& profile) const {
  if (!is_valid_profile(profile, num_players(), num_channels()))
    throw std::invalid_argument("invalid action profile");
  const auto counts = occupancy(profile, num_channels());
  std::vector<double> means(profile.size());
  for (std::size_t j = 0; j < profile.size(); ++j)
    means[j] = table_.mean(static_cast<int>(j), profile[j], counts[profile[j]]);
  return means;
}

double Environment::draw(double mean, Rng& rng) const {
  if (mean == 0.0 || model_.kind == NoiseKind::kDeterministic) return mean;
  return std::clamp(mean + model_.sigma * rng.gaussian(), 0.0, 1.0);
}

void Environment::sample_rewards_into(const ActionProfile& profile, Rng& rng,
                                      std::vector<double>& out) const {
  out = expected_rewards(profile);
  for (double& r : out) r = draw(r, rng);
}

std::vector<double> Environment::sample_rewards(const ActionProfile& profile,
                                                Rng& rng) const {
  std::vector<double> out;
  sample_rewards_into(profile, rng, out);
  return out;
}

}  // namespace mpmab
