#include "mpmab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mpmab {

namespace {

// ceil() that ignores representation noise just above an integer.
std::int64_t ceil_count(double x) {
  const double snapped = std::nearbyint(x);
  if (std::abs(x - snapped) <= 1e-9 * std::max(1.0, std::abs(x)))
    return static_cast<std::int64_t>(snapped);
  return static_cast<std::int64_t>(std::ceil(x));
}

constexpr std::int64_t kMaxLength = std::numeric_limits<std::int64_t>::max() / 4;

}  // namespace

double ResolvedSchedule::experiment_prob() const { return std::pow(eps, exp_c); }

std::int64_t lemma_play_length(double eps, double exp_c, double gap_delta,
                               std::optional<double> nu_min) {
  const double sep = gap_delta + nu_min.value_or(0.0);
  if (!(sep > 0.0))
    throw std::invalid_argument("play length needs delta + nu_min > 0");
  const double mass = std::max(std::pow(eps, exp_c), kExperimentFloor);
  return std::max<std::int64_t>(1, ceil_count(2.0 * std::log(2.0 / mass) / (sep * sep)));
}

std::int64_t default_exploration_length(double sigma, double gap_delta, int K,
                                        int M, int N) {
  const std::int64_t floor_len = 16LL * M;
  if (!(gap_delta > 0.0)) return floor_len;
  const double raw = 32.0 * sigma * sigma / (gap_delta * gap_delta) *
                     std::log(4.0 * K * M * N);
  return std::max(floor_len, ceil_count(raw));
}

std::vector<std::string> schedule_errors(const ScheduleParams& p, int M, int N) {
  std::vector<std::string> errors;
  auto open_unit = [&](double v, const char* name) {
    if (!(v > 0.0 && v < 1.0)) {
      std::ostringstream os;
      os << "schedule." << name << ": " << v << " not in (0,1)";
      errors.push_back(os.str());
    }
  };
  open_unit(p.delta, "delta");
  open_unit(p.rho, "rho");
  open_unit(p.eps, "eps");
  if (!(p.c2 > 0.0)) errors.push_back("schedule.c2: must be positive");
  if (!(p.c3 > 0.0)) errors.push_back("schedule.c3: must be positive");
  if (p.T0 && *p.T0 < 1) errors.push_back("schedule.T0: must be >= 1");
  if (p.c_eps && *p.c_eps < 1) errors.push_back("schedule.c_eps: must be >= 1");
  if (p.beta && *p.beta < 1) errors.push_back("schedule.beta: must be >= 1");
  if (p.exp_c && !(*p.exp_c > static_cast<double>(M) * N)) {
    std::ostringstream os;
    os << "schedule.exp_c: c > M*N violated (" << *p.exp_c << " <= " << M * N << ")";
    errors.push_back(os.str());
  }
  return errors;
}

ResolvedSchedule resolve_schedule(const ScheduleParams& params,
                                  const MeanRewardTable& table, double sigma,
                                  double gap_delta, std::optional<double> nu_min) {
  const int K = table.num_players();
  const int M = table.num_channels();
  const int N = table.max_occupancy();
  auto errors = schedule_errors(params, M, N);
  if (!errors.empty()) throw std::invalid_argument(errors.front());

  ResolvedSchedule s;
  s.c2 = params.c2;
  s.c3 = params.c3;
  s.delta = params.delta;
  s.rho = params.rho;
  s.eps = params.eps;
  s.exp_c = params.exp_c.value_or(static_cast<double>(M) * N + 1.0);
  s.beta = params.beta.value_or(N);
  s.reset_each_epoch = params.reset_each_epoch;
  s.T0 = params.T0 ? *params.T0
                   : default_exploration_length(sigma, gap_delta, K, M, N);
  s.c_eps = params.c_eps ? *params.c_eps
                         : lemma_play_length(s.eps, s.exp_c, gap_delta, nu_min);
  return s;
}

EpochPlan make_epoch_plan(int epoch, const ResolvedSchedule& s) {
  if (epoch < 1) throw std::invalid_argument("epoch index starts at 1");
  EpochPlan plan;
  plan.epoch = epoch;
  plan.explore_len = s.T0;
  const double growth = std::pow(static_cast<double>(epoch), 1.0 + s.delta);
  plan.matching_plays = std::max<std::int64_t>(1, ceil_count(s.c2 * growth));
  plan.count_start =
      std::clamp<std::int64_t>(ceil_count(s.rho * s.c2 * growth), 1, plan.matching_plays);
  const double exploit = s.c3 * std::ldexp(1.0, std::min(epoch, 120));
  plan.exploit_len = exploit >= static_cast<double>(kMaxLength)
                         ? kMaxLength
                         : std::max<std::int64_t>(1, ceil_count(exploit));
  return plan;
}

std::vector<double> action_probabilities(const PlayerState& state,
                                         int num_channels,
                                         double experiment_prob) {
  std::vector<double> p(static_cast<std::size_t>(num_channels), 0.0);
  if (state.mood == Mood::kDiscontent) {
    std::fill(p.begin(), p.end(), 1.0 / num_channels);
  } else if (num_channels == 1) {
    p[0] = 1.0;
  } else {
    std::fill(p.begin(), p.end(), experiment_prob / (num_channels - 1));
    p[static_cast<std::size_t>(state.baseline_action)] = 1.0 - experiment_prob;
  }
  return p;
}

Channel choose_action(const PlayerState& state, int num_channels,
                      double experiment_prob, Rng& rng) {
  if (state.mood == Mood::kDiscontent) return rng.uniform_int(num_channels);
  if (num_channels == 1) return 0;
  if (!rng.bernoulli(experiment_prob)) return state.baseline_action;
  // Experiment: uniform over the other M - 1 channels.
  Channel other = rng.uniform_int(num_channels - 1);
  return other >= state.baseline_action ? other + 1 : other;
}

std::vector<double> play_and_measure(const Environment& env,
                                     const ActionProfile& profile,
                                     std::int64_t c_eps, Rng& rng) {
  if (c_eps < 1) throw std::invalid_argument("c_eps must be >= 1");
  const auto means = env.expected_rewards(profile);
  std::vector<double> sums(means.size(), 0.0);
  for (std::int64_t t = 0; t < c_eps; ++t)
    for (std::size_t j = 0; j < means.size(); ++j) sums[j] += env.draw(means[j], rng);
  for (double& s : sums) s /= static_cast<double>(c_eps);
  return sums;
}

UtilityReading utility_from_estimate(const EstimateTable& estimates,
                                     Channel channel, double observed) {
  UtilityReading best;
  double best_dist = std::numeric_limits<double>::infinity();
  const auto& row = estimates.levels.at(static_cast<std::size_t>(channel));
  for (std::size_t n = 0; n < row.size(); ++n) {
    if (row[n] == 0.0) continue;
    const double dist = std::abs(observed - row[n]);
    // Distances within rounding of each other count as a tie.
    if (dist < best_dist - 1e-12) {
      best_dist = dist;
      best.level = static_cast<int>(n);
      best.utility = row[n];
    }
  }
  return best;
}

double acceptance_probability(double eps, double utility) {
  return std::pow(eps, 1.0 - utility);
}

bool update_state(PlayerState& state, Channel action,
                  const UtilityReading& reading, double eps, Rng& rng) {
  if (state.mood == Mood::kContent && action == state.baseline_action &&
      reading.utility == state.baseline_utility)
    return true;
  state.baseline_action = action;
  state.baseline_utility = reading.utility;
  state.baseline_level = reading.level;
  state.mood = rng.bernoulli(acceptance_probability(eps, reading.utility))
                   ? Mood::kContent
                   : Mood::kDiscontent;
  return state.mood == Mood::kContent;
}

std::optional<Channel> argmax_counts(const std::vector<std::uint64_t>& counts) {
  std::optional<Channel> best;
  for (std::size_t m = 0; m < counts.size(); ++m) {
    if (counts[m] == 0) continue;
    if (!best || counts[m] > counts[static_cast<std::size_t>(*best)])
      best = static_cast<Channel>(m);
  }
  return best;
}

Channel best_single_occupancy_channel(const EstimateTable& estimates) {
  Channel best = 0;
  for (Channel m = 1; m < estimates.num_channels(); ++m)
    if (estimates.at(m, 0) > estimates.at(best, 0)) best = m;
  return best;
}

Player::Player(int id, int num_channels, int beta, std::uint64_t seed)
    : id_(id), num_channels_(num_channels), rng_(seed), samples_(num_channels) {
  if (num_channels < 1) throw std::invalid_argument("need at least one channel");
  estimates_.beta = beta;
  estimates_.levels.assign(static_cast<std::size_t>(num_channels),
                           std::vector<double>(static_cast<std::size_t>(beta), 0.0));
  estimates_.empty_channel.assign(static_cast<std::size_t>(num_channels), true);
  state_.content_counts.assign(static_cast<std::size_t>(num_channels), 0);
}

Channel Player::explore() { return explore_channel(rng_, num_channels_); }

void Player::observe_exploration(Channel channel, double reward) {
  samples_.append(channel, reward);
}

void Player::rebuild(std::uint64_t cluster_seed) {
  ClusterOptions options;
  options.seed = cluster_seed;
  estimates_ = rebuild_estimates(samples_, estimates_.beta, options);
}

void Player::set_estimates(EstimateTable estimates) {
  if (estimates.num_channels() != num_channels_)
    throw std::invalid_argument("estimate table has wrong channel count");
  estimates_ = std::move(estimates);
}

void Player::begin_matching(bool reset) {
  std::fill(state_.content_counts.begin(), state_.content_counts.end(), 0);
  if (reset) {
    state_.baseline_action = 0;
    state_.baseline_utility = 0.0;
    state_.baseline_level = -1;
    state_.mood = Mood::kDiscontent;
    return;
  }
  // Keep ū a value of the current table.
  if (state_.baseline_level >= 0 && state_.baseline_level < estimates_.beta) {
    state_.baseline_utility = estimates_.at(state_.baseline_action, state_.baseline_level);
    if (state_.baseline_utility == 0.0) state_.baseline_level = -1;
  } else {
    state_.baseline_utility = 0.0;
    state_.baseline_level = -1;
  }
}

Channel Player::choose(const ResolvedSchedule& schedule) {
  return choose_action(state_, num_channels_, schedule.experiment_prob(), rng_);
}

void Player::observe_play(Channel action, double observed,
                          const ResolvedSchedule& schedule, bool counted) {
  const auto reading = utility_from_estimate(estimates_, action, observed);
  const bool content = update_state(state_, action, reading, schedule.eps, rng_);
  if (counted && content) ++state_.content_counts[static_cast<std::size_t>(action)];
}

Channel Player::exploit_action(bool* used_fallback) const {
  const auto best = argmax_counts(state_.content_counts);
  if (used_fallback) *used_fallback = !best.has_value();
  return best ? *best : best_single_occupancy_channel(estimates_);
}

void Player::set_state(const PlayerState& state) {
  state_ = state;
  state_.content_counts.resize(static_cast<std::size_t>(num_channels_), 0);
}

MatchingPhaseResult run_matching_phase(std::vector<Player>& players,
                                       const Environment& env,
                                       const EpochPlan& plan,
                                       const ResolvedSchedule& schedule,
                                       Rng& env_rng,
                                       const PlayObserver& observer,
                                       std::optional<std::int64_t> max_plays,
                                       bool record_profiles) {
  MatchingPhaseResult result;
  const std::int64_t plays = std::min(plan.matching_plays, max_plays.value_or(plan.matching_plays));
  ActionProfile profile(players.size());
  for (std::int64_t p = 1; p <= plays; ++p) {
    // Synchronous round: every player commits before any reward is drawn.
    for (std::size_t j = 0; j < players.size(); ++j) profile[j] = players[j].choose(schedule);
    const auto observed = play_and_measure(env, profile, schedule.c_eps, env_rng);
    const bool counted = p >= plan.count_start;
    for (std::size_t j = 0; j < players.size(); ++j)
      players[j].observe_play(profile[j], observed[j], schedule, counted);
    if (record_profiles) result.profiles.push_back(profile);
    if (observer) observer(p, profile, players);
  }
  result.plays_executed = plays;
  return result;
}

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::kExploration: return "exploration";
    case Phase::kMatching: return "matching";
    case Phase::kExploitation: return "exploitation";
  }
  return "unknown";
}

const EpochRecord* RunTrace::final_completed_epoch() const {
  for (auto it = epochs.rbegin(); it != epochs.rend(); ++it)
    if (it->completed) return &*it;
  return nullptr;
}

double RunTrace::cumulative_regret(std::int64_t time) const {
  double total = 0.0;
  for (const auto& seg : segments) {
    if (seg.start > time) break;
    const std::int64_t units = std::min(seg.length, time - seg.start + 1);
    total += static_cast<double>(units) * seg.regret_per_unit;
  }
  return total;
}

namespace {

class HorizonRunner {
 public:
  HorizonRunner(const Environment& env, const Oracle* oracle,
                const ResolvedSchedule& schedule, std::int64_t horizon,
                std::uint64_t seed)
      : env_(env),
        oracle_(oracle),
        schedule_(schedule),
        seed_(seed),
        env_rng_(derive_seed(seed, {static_cast<std::uint64_t>(Stream::kEnvironment)})) {
    trace_.horizon = horizon;
    trace_.has_regret = oracle != nullptr;
    for (int j = 0; j < env.num_players(); ++j) {
      players_.emplace_back(
          j, env.num_channels(), schedule.beta,
          derive_seed(seed, {static_cast<std::uint64_t>(Stream::kPlayer),
                             static_cast<std::uint64_t>(j)}));
    }
  }

  RunTrace run() {
    for (int epoch = 1; remaining() > 0; ++epoch) run_epoch(epoch);
    trace_.truncated_prefix =
        trace_.horizon > 0 && (trace_.epochs.empty() || !trace_.epochs.front().completed);
    fill_checkpoints();
    return std::move(trace_);
  }

 private:
  std::int64_t remaining() const { return trace_.horizon - elapsed_; }

  double regret(const ActionProfile& profile) const {
    return oracle_ ? oracle_->regret_increment(profile) : 0.0;
  }

  void emit(int epoch, Phase phase, const ActionProfile& profile, std::int64_t length) {
    const double r = regret(profile);
    trace_.segments.push_back({elapsed_ + 1, length, epoch, phase, profile, r});
    elapsed_ += length;
    const double total = r * static_cast<double>(length);
    switch (phase) {
      case Phase::kExploration: trace_.regret_exploration += total; break;
      case Phase::kMatching: trace_.regret_matching += total; break;
      case Phase::kExploitation: trace_.regret_exploitation += total; break;
    }
  }

  void run_epoch(int epoch) {
    EpochRecord record;
    record.plan = make_epoch_plan(epoch, schedule_);
    record.start = elapsed_ + 1;
    trace_.epochs.push_back(record);
    EpochRecord& rec = trace_.epochs.back();

    // Exploration.
    ActionProfile profile(players_.size());
    std::vector<double> rewards;
    const std::int64_t explore = std::min(rec.plan.explore_len, remaining());
    for (std::int64_t t = 0; t < explore; ++t) {
      for (std::size_t j = 0; j < players_.size(); ++j) profile[j] = players_[j].explore();
      env_.sample_rewards_into(profile, env_rng_, rewards);
      for (std::size_t j = 0; j < players_.size(); ++j)
        players_[j].observe_exploration(profile[j], rewards[j]);
      emit(epoch, Phase::kExploration, profile, 1);
    }
    if (remaining() == 0) return;

    for (auto& p : players_) {
      p.rebuild(derive_seed(seed_, {static_cast<std::uint64_t>(Stream::kCluster),
                                    static_cast<std::uint64_t>(p.id()),
                                    static_cast<std::uint64_t>(epoch)}));
      p.begin_matching(schedule_.reset_each_epoch);
    }

    // Matching: each play occupies c_eps time units.
    const std::int64_t affordable = (remaining() + schedule_.c_eps - 1) / schedule_.c_eps;
    const auto result = run_matching_phase(players_, env_, rec.plan, schedule_, env_rng_,
                                           {}, std::min(affordable, rec.plan.matching_plays));
    for (const auto& prof : result.profiles)
      emit(epoch, Phase::kMatching, prof, std::min(schedule_.c_eps, remaining()));
    rec.matching_completed = result.plays_executed == rec.plan.matching_plays;
    for (const auto& p : players_) {
      rec.content_counts.push_back(p.state().content_counts);
      rec.estimates.push_back(p.estimates());
    }
    if (remaining() == 0) return;

    // Exploitation.
    rec.exploit_profile.resize(players_.size());
    rec.used_fallback.resize(players_.size());
    for (std::size_t j = 0; j < players_.size(); ++j) {
      bool fallback = false;
      rec.exploit_profile[j] = players_[j].exploit_action(&fallback);
      rec.used_fallback[j] = fallback;
    }
    const std::int64_t exploit = std::min(rec.plan.exploit_len, remaining());
    emit(epoch, Phase::kExploitation, rec.exploit_profile, exploit);
    rec.completed = exploit == rec.plan.exploit_len;
  }

  void fill_checkpoints() {
    std::vector<std::int64_t> times;
    for (std::int64_t t = 1; t <= trace_.horizon; t *= 2) {
      times.push_back(t);
      if (t > trace_.horizon / 2) break;
    }
    if (trace_.horizon > 0 && (times.empty() || times.back() != trace_.horizon))
      times.push_back(trace_.horizon);
    double total = 0.0;
    std::size_t seg = 0;
    std::int64_t consumed = 0;  // units of segments[seg] already added
    std::int64_t now = 0;
    for (std::int64_t t : times) {
      while (now < t && seg < trace_.segments.size()) {
        const auto& s = trace_.segments[seg];
        const std::int64_t take = std::min(s.length - consumed, t - now);
        total += static_cast<double>(take) * s.regret_per_unit;
        consumed += take;
        now += take;
        if (consumed == s.length) {
          ++seg;
          consumed = 0;
        }
      }
      trace_.checkpoints.push_back({t, total});
    }
  }

  const Environment& env_;
  const Oracle* oracle_;
  ResolvedSchedule schedule_;
  std::uint64_t seed_;
  Rng env_rng_;
  std::vector<Player> players_;
  RunTrace trace_;
  std::int64_t elapsed_ = 0;
};

}  // namespace

RunTrace run_horizon(const Environment& env, const Oracle* oracle,
                     const ResolvedSchedule& schedule, std::int64_t horizon,
                     std::uint64_t seed) {
  if (horizon < 0) throw std::invalid_argument("horizon must be nonnegative");
  return HorizonRunner(env, oracle, schedule, horizon, seed).run();
}

}  // namespace mpmab
