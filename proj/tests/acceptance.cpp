// Acceptance suite for the desk-2x2 instance. Prints one PASS/FAIL line per
// criterion and exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpmab/chain.hpp"
#include "mpmab/dynamics.hpp"
#include "mpmab/oracle.hpp"
#include "mpmab/runner.hpp"

using namespace mpmab;

namespace {

MeanRewardTable desk_table() {
  return MeanRewardTable(2, 2, 2, {{0.9, 0.3}, {0.5, 0.2}, {0.8, 0.25}, {0.6, 0.15}});
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit_s;
  std::function<Outcome()> body;
};

// Plain enumeration in base M, independent of the library's profile iterator.
struct Enumerated {
  ActionProfile best;
  double j1 = -1.0;
  double j2 = -1.0;
};

Enumerated enumerate(const MeanRewardTable& t) {
  const int K = t.num_players(), M = t.num_channels();
  int total = 1;
  for (int j = 0; j < K; ++j) total *= M;
  Enumerated e;
  std::vector<double> values;
  for (int code = 0; code < total; ++code) {
    ActionProfile p(static_cast<std::size_t>(K));
    for (int j = K - 1, c = code; j >= 0; --j, c /= M) p[static_cast<std::size_t>(j)] = c % M;
    double v = 0.0;
    for (int j = 0; j < K; ++j) {
      int k = 0;
      for (int i = 0; i < K; ++i) k += p[static_cast<std::size_t>(i)] == p[static_cast<std::size_t>(j)];
      v += k <= t.max_occupancy() ? t.row(j, p[static_cast<std::size_t>(j)])[static_cast<std::size_t>(k - 1)] : 0.0;
    }
    if (v > e.j1) {
      e.j1 = v;
      e.best = p;
    }
    values.push_back(v);
  }
  for (double v : values)
    if (v < e.j1 && v > e.j2) e.j2 = v;
  return e;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome oracle_correctness() {
  const auto t = desk_table();
  const auto sol = solve_matching(t);
  const auto ref = enumerate(t);
  const double ref_delta = (ref.j1 - ref.j2) / (2.0 * t.num_channels() * t.max_occupancy());
  const auto nu = compute_nu_min(t);

  double ref_nu = 1.0;
  for (int j = 0; j < 2; ++j)
    for (int m = 0; m < 2; ++m) {
      const auto& r = t.row(j, m);
      for (std::size_t a = 0; a < r.size(); ++a)
        for (std::size_t b = a + 1; b < r.size(); ++b)
          if (r[a] > 0 && r[b] > 0) ref_nu = std::min(ref_nu, std::abs(r[a] - r[b]));
    }

  const bool exact = sol.optimal_profile == ref.best && sol.j1 == ref.j1 && sol.j2 == ref.j2 &&
                     sol.delta == ref_delta && nu && *nu == ref_nu;
  const bool values = sol.optimal_profile == ActionProfile{0, 1} &&
                      std::abs(sol.j1 - 1.5) < 1e-12 && std::abs(sol.j2 - 1.3) < 1e-12 &&
                      std::abs(sol.delta - 0.025) < 1e-12 && nu && std::abs(*nu - 0.3) < 1e-12 &&
                      sol.unique;
  return {exact && values, "a*=" + format_profile(sol.optimal_profile) + fmt(" J1=%.17g", sol.j1) +
                               fmt(" J2=%.17g", sol.j2) + fmt(" delta=%.17g", sol.delta) +
                               fmt(" nu_min=%.17g", nu.value_or(-1.0))};
}

Outcome recurrence_classes_at_zero() {
  const auto model = ChainModel::exact(desk_table());
  const auto classes = recurrence_classes(model.build_kernel(0.0, 5.0));
  int discontent = 0;
  std::vector<ActionProfile> singles;
  for (const auto& c : classes) {
    if (std::all_of(c.begin(), c.end(), [&](std::size_t s) { return model.all_discontent(s); }))
      ++discontent;
    else if (c.size() == 1 && model.aligned_content(c[0])) {
      ActionProfile p;
      for (const auto& ls : model.decode(c[0])) p.push_back(ls.action);
      singles.push_back(p);
    }
  }
  std::sort(singles.begin(), singles.end());
  singles.erase(std::unique(singles.begin(), singles.end()), singles.end());
  const bool pass = classes.size() == 5 && discontent == 1 && singles.size() == 4;
  return {pass, "classes=" + std::to_string(classes.size()) + " all_discontent=" +
                    std::to_string(discontent) + " aligned_singletons=" + std::to_string(singles.size())};
}

Outcome stochastic_stability() {
  const auto model = ChainModel::exact(desk_table());
  const auto rep = stability_report(model, {0, 1}, {0.3, 0.2, 0.1, 0.05}, 5.0);
  bool monotone = true, residual_ok = true;
  std::string detail = "pi(z*):";
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    detail += fmt(" %.6f", rep.rows[i].pi_optimal);
    if (i > 0 && !(rep.rows[i].pi_optimal > rep.rows[i - 1].pi_optimal)) monotone = false;
    if (!(rep.rows[i].residual <= 1e-10)) residual_ok = false;
  }
  const auto& last = rep.rows.back();
  bool dominates = true;
  for (std::size_t s = 0; s < rep.profiles.size(); ++s)
    if (rep.profiles[s] != rep.optimal_profile && !(last.pi_optimal > last.pi_singletons[s]))
      dominates = false;
  double worst_residual = 0.0;
  for (const auto& r : rep.rows) worst_residual = std::max(worst_residual, r.residual);
  detail += fmt(" max_residual=%.3g", worst_residual);
  return {monotone && dominates && residual_ok, detail};
}

Outcome play_error_rate() {
  const auto table = desk_table();
  const Environment env(table, RewardModel{0.05, NoiseKind::kTruncatedGaussian});
  const double eps = 0.3, c = 5.0;
  const double e_c = std::pow(eps, c);
  const auto c_eps = lemma_play_length(eps, c, 0.025, 0.3);
  std::vector<EstimateTable> est{EstimateTable::exact(table, 0, 2), EstimateTable::exact(table, 1, 2)};
  Rng rng(derive_seed(4, {static_cast<std::uint64_t>(Stream::kAux)}));
  const std::int64_t plays = 1'000'000;
  std::int64_t errors[2] = {0, 0};
  ActionProfile p(2);
  for (std::int64_t i = 0; i < plays; ++i) {
    p[0] = rng.uniform_int(2);
    p[1] = rng.uniform_int(2);
    const auto truth = env.expected_rewards(p);
    const auto avg = play_and_measure(env, p, c_eps, rng);
    for (int j = 0; j < 2; ++j) {
      const auto r = utility_from_estimate(est[static_cast<std::size_t>(j)], p[static_cast<std::size_t>(j)],
                                           avg[static_cast<std::size_t>(j)]);
      errors[j] += r.utility != truth[static_cast<std::size_t>(j)];
    }
  }
  const double bound = e_c + 3.0 * std::sqrt(e_c / static_cast<double>(plays));
  const double worst = static_cast<double>(std::max(errors[0], errors[1])) / static_cast<double>(plays);
  return {c_eps == 128 && worst <= bound,
          "c_eps=" + std::to_string(c_eps) + fmt(" max_error_fraction=%.3g", worst) + fmt(" bound=%.6g", bound)};
}

std::vector<SeedOutcome> desk_runs(std::int64_t horizon) {
  const auto cfg = load_config(std::string(MPMAB_SOURCE_DIR) + "/configs/desk_2x2.json");
  const auto exp = Experiment::prepare(*cfg.config);
  std::vector<SeedOutcome> outcomes;
  for (std::uint64_t seed = 1; seed <= 20; ++seed)
    outcomes.push_back(outcome_of(exp, exp.run_seed(seed, horizon), seed));
  return outcomes;
}

Outcome end_to_end() {
  const auto outcomes = desk_runs(1'000'000);
  int hits = 0;
  std::string finals;
  for (const auto& o : outcomes) {
    hits += o.final_optimal;
    finals += " " + (o.final_profile ? format_profile(*o.final_profile) : std::string("none"));
  }
  return {hits >= 18, "final=a* in " + std::to_string(hits) + "/20 seeds; finals:" + finals};
}

Outcome regret_shape() {
  const auto outcomes = desk_runs(std::int64_t{1} << 20);
  auto mean_at = [&](std::int64_t T) {
    double sum = 0.0;
    for (const auto& o : outcomes) {
      const auto it = std::find_if(o.checkpoints.begin(), o.checkpoints.end(),
                                   [&](const RegretCheckpoint& c) { return c.time == T; });
      if (it == o.checkpoints.end()) throw std::runtime_error("missing checkpoint " + std::to_string(T));
      sum += it->cumulative;
    }
    return sum / static_cast<double>(outcomes.size());
  };
  auto g = [](double T) { return std::pow(std::log(T), 2.5); };
  const double t14 = 1 << 14, t16 = 1 << 16, t18 = 1 << 18, t19 = 1 << 19, t20 = 1 << 20;
  const double s_mid = (mean_at(1 << 18) - mean_at(1 << 16)) / (g(t18) - g(t16));
  const double s_last = (mean_at(1 << 20) - mean_at(1 << 19)) / (g(t20) - g(t19));
  const double ratio = s_last / s_mid;
  const double per_t = mean_at(1 << 20) / t20;
  std::string detail = fmt("R(2^14)=%.0f", mean_at(static_cast<std::int64_t>(t14))) +
                       fmt(" R(2^20)=%.0f", mean_at(1 << 20)) + fmt(" s_mid=%.4g", s_mid) +
                       fmt(" s_last=%.4g", s_last) + fmt(" ratio=%.3f", ratio) + fmt(" R/T=%.4f", per_t);
  return {s_mid > 0.0 && ratio >= 0.5 && ratio <= 2.0 && per_t < 0.02, detail};
}

Outcome estimation_quality() {
  const auto table = desk_table();
  const Environment env(table, RewardModel{0.05, NoiseKind::kTruncatedGaussian});
  int good = 0;
  double worst_overall = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::vector<Player> players;
    for (int j = 0; j < 2; ++j)
      players.emplace_back(j, 2, 2, derive_seed(seed, {static_cast<std::uint64_t>(Stream::kPlayer),
                                                       static_cast<std::uint64_t>(j)}));
    Rng env_rng(derive_seed(seed, {static_cast<std::uint64_t>(Stream::kEnvironment)}));
    ActionProfile p(2);
    std::vector<double> rewards;
    auto enough = [&] {
      for (const auto& pl : players)
        for (int m = 0; m < 2; ++m)
          if (pl.samples().size(m) < 5000) return false;
      return true;
    };
    while (!enough()) {
      for (std::size_t j = 0; j < 2; ++j) p[j] = players[j].explore();
      env.sample_rewards_into(p, env_rng, rewards);
      for (std::size_t j = 0; j < 2; ++j) players[j].observe_exploration(p[j], rewards[j]);
    }
    double worst = 0.0;
    for (auto& pl : players) {
      pl.rebuild(derive_seed(seed, {static_cast<std::uint64_t>(Stream::kCluster),
                                    static_cast<std::uint64_t>(pl.id())}));
      for (int m = 0; m < 2; ++m)
        for (int n = 0; n < 2; ++n)
          worst = std::max(worst, std::abs(pl.estimates().at(m, n) - table.mean(pl.id(), m, n + 1)));
    }
    good += worst <= 0.025;
    worst_overall = std::max(worst_overall, worst);
  }
  return {good >= 19, "within delta in " + std::to_string(good) + "/20 seeds" +
                          fmt(" worst_error=%.4g", worst_overall)};
}

Outcome chain_consistency() {
  const auto table = desk_table();
  const Environment env(table, RewardModel{0.0, NoiseKind::kDeterministic});
  const auto model = ChainModel::exact(table);
  const double eps = 0.1;
  const auto pi = stationary_distribution(model.build_kernel(eps, 5.0)).pi;

  ResolvedSchedule s;
  s.eps = eps;
  s.exp_c = 5.0;
  s.c_eps = 1;
  s.beta = 2;
  const std::uint64_t seed = 1;
  std::vector<Player> players;
  for (int j = 0; j < 2; ++j) {
    players.emplace_back(j, 2, 2, derive_seed(seed, {static_cast<std::uint64_t>(Stream::kPlayer),
                                                     static_cast<std::uint64_t>(j)}));
    players.back().set_estimates(EstimateTable::exact(table, j, 2));
  }
  EpochPlan plan;
  plan.matching_plays = 1'000'000;
  std::vector<double> visits(model.num_states(), 0.0);
  Rng env_rng(derive_seed(seed, {static_cast<std::uint64_t>(Stream::kEnvironment)}));
  run_matching_phase(
      players, env, plan, s, env_rng,
      [&](std::int64_t, const ActionProfile&, const std::vector<Player>& ps) {
        visits[model.encode({ps[0].state(), ps[1].state()})] += 1.0;
      },
      {}, false);
  double tv = 0.0;
  for (std::size_t i = 0; i < visits.size(); ++i)
    tv += std::abs(visits[i] / static_cast<double>(plan.matching_plays) - pi(static_cast<Eigen::Index>(i)));
  tv /= 2.0;
  const auto zs = model.aligned_content_state({0, 1});
  return {tv <= 0.05, fmt("TV=%.4f", tv) + fmt(" empirical(z*)=%.4f", visits[zs] / 1e6) +
                          fmt(" pi(z*)=%.4f", pi(static_cast<Eigen::Index>(zs)))};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "oracle correctness", 1.0, oracle_correctness},
      {2, "recurrence classes at eps=0", 1.0, recurrence_classes_at_zero},
      {3, "stochastic stability", 10.0, stochastic_stability},
      {4, "play utility error rate", 60.0, play_error_rate},
      {5, "end-to-end convergence", 600.0, end_to_end},
      {6, "regret growth shape", 600.0, regret_shape},
      {7, "estimation quality", 120.0, estimation_quality},
      {8, "simulation-chain consistency", 300.0, chain_consistency},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.body();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.time_limit_s;
    const bool pass = out.pass && in_time;
    failures += !pass;
    std::printf("%s criterion %d (%s): %s [%.2fs%s]\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                out.detail.c_str(), secs, in_time ? "" : ", over time limit");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
