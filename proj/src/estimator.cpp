#include "mpmab/estimator.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace mpmab {

void SampleStore::append(Channel channel, double reward) {
  if (!(reward >= 0.0 && reward <= 1.0))
    throw std::invalid_argument("reward outside [0,1]");
  if (reward == 0.0) {
    ++zeros_.at(static_cast<std::size_t>(channel));
    return;
  }
  samples_.at(static_cast<std::size_t>(channel)).push_back(reward);
}

EstimateTable EstimateTable::exact(const MeanRewardTable& table, int player,
                                   int beta) {
  EstimateTable est;
  est.beta = beta;
  for (Channel m = 0; m < table.num_channels(); ++m) {
    std::vector<double> row(static_cast<std::size_t>(beta), 0.0);
    const auto& truth = table.row(player, m);
    for (std::size_t n = 0; n < row.size() && n < truth.size(); ++n)
      row[n] = truth[n];
    est.levels.push_back(std::move(row));
    est.empty_channel.push_back(false);
  }
  return est;
}

namespace {

// Sorted data with prefix sums, so a cluster that is a contiguous run
// [lo, hi) has O(1) mean and SSE.
class SortedData {
 public:
  explicit SortedData(std::span<const double> samples)
      : x_(samples.begin(), samples.end()) {
    std::sort(x_.begin(), x_.end());
    sum_.assign(x_.size() + 1, 0.0);
    sum_sq_.assign(x_.size() + 1, 0.0);
    for (std::size_t i = 0; i < x_.size(); ++i) {
      sum_[i + 1] = sum_[i] + x_[i];
      sum_sq_[i + 1] = sum_sq_[i] + x_[i] * x_[i];
    }
  }

  std::size_t size() const { return x_.size(); }
  double operator[](std::size_t i) const { return x_[i]; }
  const std::vector<double>& values() const { return x_; }

  double mean(std::size_t lo, std::size_t hi) const {
    return (sum_[hi] - sum_[lo]) / static_cast<double>(hi - lo);
  }
  double sse(std::size_t lo, std::size_t hi) const {
    if (hi <= lo) return 0.0;
    const double n = static_cast<double>(hi - lo);
    const double s = sum_[hi] - sum_[lo];
    return std::max(0.0, (sum_sq_[hi] - sum_sq_[lo]) - s * s / n);
  }
  // Cost of assigning [lo, hi) to a fixed center c.
  double cost(std::size_t lo, std::size_t hi, double c) const {
    if (hi <= lo) return 0.0;
    const double n = static_cast<double>(hi - lo);
    const double s = sum_[hi] - sum_[lo];
    return std::max(0.0, (sum_sq_[hi] - sum_sq_[lo]) - 2.0 * c * s + n * c * c);
  }

 private:
  std::vector<double> x_;
  std::vector<double> sum_;
  std::vector<double> sum_sq_;
};

// Cluster boundaries for ascending centers: point i goes to the nearest
// center, ties to the lower one.
std::vector<std::size_t> assign(const SortedData& data,
                                const std::vector<double>& centers) {
  std::vector<std::size_t> bounds(centers.size() + 1, 0);
  bounds.back() = data.size();
  const auto& x = data.values();
  for (std::size_t r = 0; r + 1 < centers.size(); ++r) {
    const double mid = 0.5 * (centers[r] + centers[r + 1]);
    // Points <= mid belong to cluster r.
    bounds[r + 1] = static_cast<std::size_t>(
        std::upper_bound(x.begin(), x.end(), mid) - x.begin());
  }
  return bounds;
}

double objective(const SortedData& data, const std::vector<double>& centers,
                 const std::vector<std::size_t>& bounds) {
  double total = 0.0;
  for (std::size_t r = 0; r < centers.size(); ++r)
    total += data.cost(bounds[r], bounds[r + 1], centers[r]);
  return total;
}

std::vector<double> seed_plus_plus(const SortedData& data, int beta, Rng& rng) {
  const std::size_t n = data.size();
  std::vector<double> centers;
  centers.push_back(data[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(n)))]);
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < beta) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (data[i] - c) * (data[i] - c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) break;
    double target = rng.uniform() * total;
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= d2[i];
      if (target < 0.0 && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
    if (d2[pick] <= 0.0) break;
    centers.push_back(data[pick]);
  }
  std::sort(centers.begin(), centers.end());
  return centers;
}

ClusterResult lloyd(const SortedData& data, std::vector<double> centers,
                    int max_iterations) {
  ClusterResult result;
  auto bounds = assign(data, centers);
  result.sse_history.push_back(objective(data, centers, bounds));
  for (int it = 0; it < max_iterations; ++it) {
    std::vector<double> next;
    next.reserve(centers.size());
    for (std::size_t r = 0; r < centers.size(); ++r) {
      if (bounds[r + 1] > bounds[r]) next.push_back(data.mean(bounds[r], bounds[r + 1]));
    }
    // Means of contiguous runs are already ascending.
    const bool converged = next == centers;
    centers = std::move(next);
    bounds = assign(data, centers);
    result.sse_history.push_back(objective(data, centers, bounds));
    if (converged) break;
  }
  for (std::size_t r = 0; r < centers.size(); ++r) {
    if (bounds[r + 1] > bounds[r]) {
      result.means.push_back(data.mean(bounds[r], bounds[r + 1]));
      result.sse += data.sse(bounds[r], bounds[r + 1]);
    }
  }
  std::sort(result.means.begin(), result.means.end(), std::greater<>());
  return result;
}

}  // namespace

ClusterResult cluster_detailed(std::span<const double> samples, int beta,
                               const ClusterOptions& options) {
  if (samples.empty()) throw std::invalid_argument("cluster: no samples");
  if (beta < 1) throw std::invalid_argument("cluster: beta must be >= 1");
  SortedData data(samples);

  std::vector<double> distinct = data.values();
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (static_cast<int>(distinct.size()) <= beta) {
    ClusterResult result;
    result.means.assign(distinct.rbegin(), distinct.rend());
    result.sse_history = {0.0};
    return result;
  }

  Rng rng(options.seed);
  ClusterResult best;
  bool have_best = false;
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    auto result = lloyd(data, seed_plus_plus(data, beta, rng), options.max_iterations);
    if (!have_best || result.sse < best.sse) {
      best = std::move(result);
      have_best = true;
    }
  }
  return best;
}

std::vector<double> cluster(std::span<const double> samples, int beta,
                            const ClusterOptions& options) {
  return cluster_detailed(samples, beta, options).means;
}

EstimateTable rebuild_estimates(const SampleStore& store, int beta,
                                const ClusterOptions& options) {
  if (beta < 1) throw std::invalid_argument("beta must be >= 1");
  EstimateTable est;
  est.beta = beta;
  for (Channel m = 0; m < store.num_channels(); ++m) {
    std::vector<double> row(static_cast<std::size_t>(beta), 0.0);
    const auto& xs = store.samples(m);
    est.empty_channel.push_back(xs.empty());
    if (!xs.empty()) {
      ClusterOptions per_channel = options;
      per_channel.seed = derive_seed(options.seed, {static_cast<std::uint64_t>(m)});
      const auto means = cluster(xs, beta, per_channel);
      std::copy(means.begin(), means.end(), row.begin());
    }
    est.levels.push_back(std::move(row));
  }
  return est;
}

}  // namespace mpmab
