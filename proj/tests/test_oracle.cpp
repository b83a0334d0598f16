#include <doctest.h>

#include <cmath>

#include "desk.hpp"
#include "mpmab/oracle.hpp"

using namespace mpmab;
using mpmab::testing::desk_table;

namespace {

// Independent enumeration: decode each integer in [0, M^K) as a base-M
// profile and score it with explicit per-player occupancy counting.
struct Naive {
  ActionProfile best;
  double j1 = -1.0;
  double j2 = -1.0;
  int ties = 0;
};

Naive naive_optimum(const MeanRewardTable& t) {
  const int K = t.num_players(), M = t.num_channels();
  long total = 1;
  for (int j = 0; j < K; ++j) total *= M;
  std::vector<double> values;
  std::vector<ActionProfile> profiles;
  for (long code = 0; code < total; ++code) {
    ActionProfile p(static_cast<std::size_t>(K));
    long c = code;
    for (int j = K - 1; j >= 0; --j) {
      p[static_cast<std::size_t>(j)] = static_cast<int>(c % M);
      c /= M;
    }
    double v = 0.0;
    for (int j = 0; j < K; ++j) {
      int k = 0;
      for (int i = 0; i < K; ++i) k += p[static_cast<std::size_t>(i)] == p[static_cast<std::size_t>(j)];
      v += k <= t.max_occupancy() ? t.row(j, p[static_cast<std::size_t>(j)])[static_cast<std::size_t>(k - 1)] : 0.0;
    }
    values.push_back(v);
    profiles.push_back(p);
  }
  Naive n;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] > n.j1) {
      n.j1 = values[i];
      n.best = profiles[i];
    }
  }
  for (double v : values) {
    if (v == n.j1) ++n.ties;
    else if (v > n.j2) n.j2 = v;
  }
  if (n.j2 < 0.0) n.j2 = n.j1;
  return n;
}

}  // namespace

TEST_CASE("system reward on the desk instance") {
  const auto t = desk_table();
  CHECK(system_reward(t, {0, 1}) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(system_reward(t, {0, 0}) == doctest::Approx(0.55).epsilon(1e-15));
  MeanRewardTable single(1, 3, 1, {{0.4}, {0.7}, {0.2}});
  CHECK(system_reward(single, {1}) == 0.7);
}

TEST_CASE("desk matching solution") {
  const auto sol = solve_matching(desk_table());
  CHECK(sol.optimal_profile == ActionProfile{0, 1});
  CHECK(sol.j1 == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(sol.j2 == doctest::Approx(1.3).epsilon(1e-12));
  CHECK(sol.delta == doctest::Approx(0.025).epsilon(1e-12));
  CHECK(sol.unique);
}

TEST_CASE("single player picks the better channel") {
  MeanRewardTable t(1, 2, 3, {{0.9, 0.5, 0.1}, {0.5, 0.3, 0.0}});
  const auto sol = solve_matching(t);
  CHECK(sol.optimal_profile == ActionProfile{0});
  CHECK(sol.j1 == 0.9);
  CHECK(sol.j2 == 0.5);
  CHECK(sol.delta == doctest::Approx(0.4 / (2 * 2 * 3)));
}

TEST_CASE("ties make the optimum non-unique") {
  MeanRewardTable t(2, 2, 1, {{0.5}, {0.5}, {0.5}, {0.5}});
  const auto sol = solve_matching(t);
  CHECK_FALSE(sol.unique);
  CHECK(sol.num_optimal == 2);
  CHECK(sol.optimal_profile == ActionProfile{0, 1});  // lexicographically first
  CHECK(sol.j2 == 0.0);                               // collisions pay zero with N=1
}

TEST_CASE("enumeration cap") {
  Rng rng(1);
  const auto t = mpmab::testing::random_table(rng, 4, 3, 2);
  CHECK_THROWS_AS(solve_matching(t, 80), OracleError);
  CHECK_NOTHROW(solve_matching(t, 81));
}

TEST_CASE("solve_matching agrees with a naive re-enumeration") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const int M = 1 + rng.uniform_int(4);
    const int N = 1 + rng.uniform_int(3);
    const int K = 1 + rng.uniform_int(std::min(5, M * N));
    const auto t = mpmab::testing::random_table(rng, K, M, N);
    const auto sol = solve_matching(t);
    const auto naive = naive_optimum(t);
    CHECK(sol.j1 == naive.j1);
    CHECK(sol.j2 == naive.j2);
    CHECK(sol.optimal_profile == naive.best);
    CHECK(sol.unique == (naive.ties == 1));
    CHECK(sol.delta <= (sol.j1 - sol.j2) / 2.0);
  }
}

TEST_CASE("regret increments") {
  const Oracle oracle(desk_table());
  CHECK(oracle.regret_increment({0, 1}) == 0.0);
  CHECK(oracle.regret_increment({1, 0}) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(oracle.regret_increment({1, 1}) == doctest::Approx(1.15).epsilon(1e-12));

  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = mpmab::testing::random_table(rng, 3, 3, 2);
    const Oracle o(t);
    ActionProfile p(3, 0);
    do {
      const double r = o.regret_increment(p);
      CHECK(r >= 0.0);
      CHECK((r == 0.0) == (system_reward(t, p) == o.solution().j1));
    } while (next_profile(p, 3));
  }
}

TEST_CASE("scaling all means keeps the optimal profile") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = mpmab::testing::random_table(rng, 3, 2, 2);
    const auto base = solve_matching(t);
    for (double g : {1.0, 0.7, 0.25}) CHECK(solve_matching(t.scaled(g)).optimal_profile == base.optimal_profile);
  }
}

TEST_CASE("nu_min") {
  CHECK(compute_nu_min(desk_table()).value() == doctest::Approx(0.3).epsilon(1e-12));
  MeanRewardTable n1(2, 2, 1, {{0.9}, {0.5}, {0.8}, {0.6}});
  CHECK_FALSE(compute_nu_min(n1).has_value());
  // (player 1, channel 2) has a zero second level and contributes no pair.
  MeanRewardTable partial(1, 2, 2, {{0.9, 0.5}, {0.6, 0.0}});
  CHECK(compute_nu_min(partial).value() == doctest::Approx(0.4));
}

TEST_CASE("separability check") {
  const auto t = desk_table();
  const auto rep = check_separability(t, 0.05, 0.1, 0.0025);
  // 4 * M * c * exp((K-1)/(M-1)) * sqrt(sigma^2 + eps2)
  CHECK(rep.threshold == doctest::Approx(0.8 * std::exp(1.0) * std::sqrt(0.005)).epsilon(1e-12));
  CHECK(rep.threshold == doctest::Approx(0.1538).epsilon(1e-3));
  CHECK(rep.passed);
  CHECK(rep.offending.empty());

  const auto strict = check_separability(t, 0.05, 5.0, 0.0025);
  CHECK(strict.threshold > 1.0);
  CHECK_FALSE(strict.passed);
  CHECK(strict.offending.size() == 4);

  MeanRewardTable n1(2, 2, 1, {{0.9}, {0.5}, {0.8}, {0.6}});
  CHECK(check_separability(n1, 0.05, 5.0, 0.0025).passed);
}

TEST_CASE("profile formatting is 1-based") { CHECK(format_profile({0, 1, 2}) == "(1,2,3)"); }
