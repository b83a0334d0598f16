#include "mpmab/runner.hpp"

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace mpmab {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

json profile_json(const ActionProfile& p) {
  json out = json::array();
  for (Channel a : p) out.push_back(a + 1);
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

Experiment Experiment::prepare(const RunConfig& config) {
  Experiment exp{config, Environment(config.table, config.reward), std::nullopt, {}, 0.0, {}};
  try {
    exp.oracle.emplace(config.table, config.enumeration_cap);
  } catch (const OracleError&) {
    // Simulation-only mode.
  }
  if (config.known_delta) {
    exp.players_delta = *config.known_delta;
  } else if (exp.oracle) {
    exp.players_delta = exp.oracle->solution().delta;
  }
  exp.players_nu_min = config.known_nu_min ? config.known_nu_min : compute_nu_min(config.table);
  exp.schedule = resolve_schedule(config.schedule, config.table, config.reward.sigma,
                                  exp.players_delta, exp.players_nu_min);
  return exp;
}

RunTrace Experiment::run_seed(std::uint64_t seed, std::int64_t horizon) const {
  return run_horizon(env, oracle ? &*oracle : nullptr, schedule, horizon, seed);
}

std::filesystem::path resolve_out_dir(const std::optional<std::filesystem::path>& flag,
                                      const RunConfig& config) {
  if (flag) return *flag;
  if (config.out_dir) return *config.out_dir;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "out";
}

void write_trace_csv(const RunTrace& trace, int num_players, std::ostream& out) {
  out << "time,epoch,phase";
  for (int j = 1; j <= num_players; ++j) out << ",a_" << j;
  out << ",regret\n";
  std::string line;
  for (const auto& seg : trace.segments) {
    std::string tail = "," + std::to_string(seg.epoch) + "," + to_string(seg.phase);
    for (Channel a : seg.profile) tail += "," + std::to_string(a + 1);
    tail += "," + fmt_double(seg.regret_per_unit) + "\n";
    for (std::int64_t t = seg.start; t < seg.start + seg.length; ++t) {
      line = std::to_string(t);
      line += tail;
      out << line;
    }
  }
}

SeedOutcome outcome_of(const Experiment& exp, const RunTrace& trace, std::uint64_t seed) {
  SeedOutcome o;
  o.seed = seed;
  if (const auto* ep = trace.final_completed_epoch()) {
    o.final_profile = ep->exploit_profile;
    o.final_optimal = exp.oracle && ep->exploit_profile == exp.oracle->solution().optimal_profile;
  }
  o.total_regret = trace.total_regret();
  o.checkpoints = trace.checkpoints;
  return o;
}

json summary_json(const Experiment& exp, const RunTrace& trace, std::uint64_t seed) {
  json s;
  s["seed"] = seed;
  s["horizon"] = trace.horizon;
  s["config"] = json::parse(exp.config.source_text);
  const auto& sc = exp.schedule;
  s["schedule"] = {{"T0", sc.T0}, {"c2", sc.c2}, {"c3", sc.c3}, {"c_eps", sc.c_eps},
                   {"delta", sc.delta}, {"rho", sc.rho}, {"eps", sc.eps},
                   {"exp_c", sc.exp_c}, {"beta", sc.beta},
                   {"reset_each_epoch", sc.reset_each_epoch}};
  if (exp.oracle) {
    const auto& sol = exp.oracle->solution();
    s["oracle"] = {{"optimal_profile", profile_json(sol.optimal_profile)},
                   {"J1", sol.j1}, {"J2", sol.j2}, {"delta", sol.delta}, {"unique", sol.unique}};
  }
  s["truncated_prefix"] = trace.truncated_prefix;
  json epochs = json::array();
  for (const auto& ep : trace.epochs) {
    json e;
    e["epoch"] = ep.plan.epoch;
    e["start"] = ep.start;
    e["explore_len"] = ep.plan.explore_len;
    e["matching_plays"] = ep.plan.matching_plays;
    e["count_start"] = ep.plan.count_start;
    e["exploit_len"] = ep.plan.exploit_len;
    e["completed"] = ep.completed;
    e["matching_completed"] = ep.matching_completed;
    if (!ep.exploit_profile.empty()) {
      e["exploit_profile"] = profile_json(ep.exploit_profile);
      e["fallback"] = ep.used_fallback;
    }
    e["content_counts"] = ep.content_counts;
    json est = json::array();
    for (const auto& t : ep.estimates) est.push_back(t.levels);
    e["estimates"] = est;
    epochs.push_back(e);
  }
  s["epochs"] = epochs;
  if (trace.has_regret) {
    s["regret"] = {{"exploration", trace.regret_exploration},
                   {"matching", trace.regret_matching},
                   {"exploitation", trace.regret_exploitation},
                   {"total", trace.total_regret()}};
    json cps = json::array();
    for (const auto& c : trace.checkpoints) cps.push_back({{"T", c.time}, {"R", c.cumulative}});
    s["checkpoints"] = cps;
  }
  const auto o = outcome_of(exp, trace, seed);
  s["final_profile"] = o.final_profile ? profile_json(*o.final_profile) : json(nullptr);
  s["final_optimal"] = o.final_optimal;
  return s;
}

json aggregate_json(const Experiment& exp, const std::vector<SeedOutcome>& outcomes,
                    std::int64_t horizon) {
  json a;
  a["horizon"] = horizon;
  a["num_seeds"] = outcomes.size();
  std::size_t optimal = 0;
  double regret_sum = 0.0;
  json per_seed = json::array();
  for (const auto& o : outcomes) {
    optimal += o.final_optimal ? 1 : 0;
    regret_sum += o.total_regret;
    per_seed.push_back({{"seed", o.seed},
                        {"final_profile", o.final_profile ? profile_json(*o.final_profile) : json(nullptr)},
                        {"final_optimal", o.final_optimal},
                        {"regret", o.total_regret}});
  }
  a["seeds"] = per_seed;
  if (exp.oracle) {
    a["optimal_profile"] = profile_json(exp.oracle->solution().optimal_profile);
    a["fraction_final_optimal"] =
        outcomes.empty() ? 0.0 : static_cast<double>(optimal) / static_cast<double>(outcomes.size());
    a["mean_regret"] = outcomes.empty() ? 0.0 : regret_sum / static_cast<double>(outcomes.size());
    if (!outcomes.empty()) {
      json cps = json::array();
      for (std::size_t i = 0; i < outcomes.front().checkpoints.size(); ++i) {
        double sum = 0.0;
        for (const auto& o : outcomes) sum += o.checkpoints[i].cumulative;
        cps.push_back({{"T", outcomes.front().checkpoints[i].time},
                       {"mean_R", sum / static_cast<double>(outcomes.size())}});
      }
      a["mean_checkpoints"] = cps;
    }
  }
  return a;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<SeedOutcome> run_experiment(const Experiment& exp,
                                        const std::vector<std::uint64_t>& seeds,
                                        std::int64_t horizon,
                                        const std::filesystem::path& out_dir, int jobs) {
  std::filesystem::create_directories(out_dir);
  std::vector<SeedOutcome> outcomes(seeds.size());
  std::vector<std::string> trace_files(seeds.size()), summary_files(seeds.size());
  parallel_for(seeds.size(), jobs, [&](std::size_t i) {
    const auto seed = seeds[i];
    const auto trace = exp.run_seed(seed, horizon);
    trace_files[i] = "trace_seed_" + std::to_string(seed) + ".csv";
    summary_files[i] = "summary_seed_" + std::to_string(seed) + ".json";
    {
      const auto path = out_dir / trace_files[i];
      auto out = open_out(path);
      write_trace_csv(trace, exp.env.num_players(), out);
      finish(out, path);
    }
    {
      const auto path = out_dir / summary_files[i];
      auto out = open_out(path);
      out << summary_json(exp, trace, seed).dump(2) << "\n";
      finish(out, path);
    }
    outcomes[i] = outcome_of(exp, trace, seed);
  });

  const auto agg_path = out_dir / "aggregate.json";
  auto agg = open_out(agg_path);
  agg << aggregate_json(exp, outcomes, horizon).dump(2) << "\n";
  finish(agg, agg_path);

  json manifest;
  manifest["config_text"] = exp.config.source_text;
  manifest["horizon"] = horizon;
  json runs = json::array();
  for (std::size_t i = 0; i < seeds.size(); ++i)
    runs.push_back({{"seed", seeds[i]}, {"trace", trace_files[i]}, {"summary", summary_files[i]}});
  manifest["runs"] = runs;
  manifest["aggregate"] = "aggregate.json";
  const auto man_path = out_dir / "manifest.json";
  auto man = open_out(man_path);
  man << manifest.dump(2) << "\n";
  finish(man, man_path);
  return outcomes;
}

SweepParam parse_sweep_param(const std::string& name) {
  if (name == "eps") return SweepParam::kEps;
  if (name == "sigma") return SweepParam::kSigma;
  if (name == "horizon" || name == "T") return SweepParam::kHorizon;
  throw std::invalid_argument("unknown sweep parameter '" + name + "' (eps, sigma, horizon)");
}

std::string to_string(SweepParam param) {
  switch (param) {
    case SweepParam::kEps: return "eps";
    case SweepParam::kSigma: return "sigma";
    case SweepParam::kHorizon: return "horizon";
  }
  return "?";
}

void run_sweep(const RunConfig& config, SweepParam param, const std::vector<double>& values,
               const std::vector<std::uint64_t>& seeds, std::int64_t horizon,
               std::ostream& out, int jobs) {
  out << "param,value,seed,horizon,epochs_completed,final_profile,final_optimal,"
         "regret,regret_per_T,error\n";
  const std::size_t n = values.size() * seeds.size();
  std::vector<std::string> rows(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    const double value = values[i / seeds.size()];
    const auto seed = seeds[i % seeds.size()];
    std::int64_t T = horizon;
    std::ostringstream row;
    row << to_string(param) << "," << fmt_double(value) << "," << seed << ",";
    try {
      RunConfig cfg = config;
      switch (param) {
        case SweepParam::kEps: cfg.schedule.eps = value; break;
        case SweepParam::kSigma: cfg.reward.sigma = value; break;
        case SweepParam::kHorizon: T = static_cast<std::int64_t>(value); break;
      }
      const auto errs = schedule_errors(cfg.schedule, cfg.table.num_channels(),
                                        cfg.table.max_occupancy());
      if (!errs.empty()) throw std::invalid_argument(errs.front());
      if (!(cfg.reward.sigma >= 0.0)) throw std::invalid_argument("sigma must be nonnegative");
      if (T < 0) throw std::invalid_argument("horizon must be nonnegative");
      const auto exp = Experiment::prepare(cfg);
      const auto trace = exp.run_seed(seed, T);
      const auto o = outcome_of(exp, trace, seed);
      std::size_t completed = 0;
      for (const auto& ep : trace.epochs) completed += ep.completed ? 1 : 0;
      row << T << "," << completed << ","
          << (o.final_profile ? "\"" + format_profile(*o.final_profile) + "\"" : std::string("none")) << ","
          << (o.final_optimal ? 1 : 0) << "," << fmt_double(o.total_regret) << ","
          << fmt_double(T > 0 ? o.total_regret / static_cast<double>(T) : 0.0) << ",";
    } catch (const std::exception& e) {
      std::string msg = e.what();
      for (char& c : msg)
        if (c == ',' || c == '\n') c = ';';
      row << T << ",,,,,," << msg;
    }
    rows[i] = row.str();
  });
  for (const auto& r : rows) out << r << "\n";
}

std::string oracle_text(const RunConfig& config) {
  std::ostringstream os;
  os << "instance: K=" << config.table.num_players() << " M=" << config.table.num_channels()
     << " N=" << config.table.max_occupancy() << "\n";
  try {
    const auto sol = solve_matching(config.table, config.enumeration_cap);
    os << "optimal_profile: " << format_profile(sol.optimal_profile) << "\n"
       << "J1: " << fmt_double(sol.j1) << "\n"
       << "J2: " << fmt_double(sol.j2) << "\n"
       << "delta: " << fmt_double(sol.delta) << "\n"
       << "unique: " << (sol.unique ? "true" : "false") << "\n";
  } catch (const OracleError& e) {
    os << "matching: " << e.what() << "\n";
  }
  const auto rep = check_separability(config.table, config.reward.sigma,
                                      config.separability.c_sep, config.separability.eps2);
  os << "nu_min: " << (rep.nu_min ? fmt_double(*rep.nu_min) : std::string("not applicable")) << "\n"
     << "separability_threshold: " << fmt_double(rep.threshold) << "\n"
     << "separability_passed: " << (rep.passed ? "true" : "false") << "\n";
  for (const auto& v : rep.offending) {
    os << "  offending: player " << v.player + 1 << " channel " << v.channel + 1 << " occupancies "
       << v.occupancy_a << "," << v.occupancy_b << " gap " << fmt_double(v.gap) << "\n";
  }
  return os.str();
}

json oracle_json(const RunConfig& config) {
  json j;
  try {
    const auto sol = solve_matching(config.table, config.enumeration_cap);
    j["matching"] = {{"optimal_profile", profile_json(sol.optimal_profile)},
                     {"J1", sol.j1}, {"J2", sol.j2}, {"delta", sol.delta},
                     {"unique", sol.unique}, {"num_optimal", sol.num_optimal}};
  } catch (const OracleError& e) {
    j["matching"] = {{"error", e.what()}};
  }
  const auto rep = check_separability(config.table, config.reward.sigma,
                                      config.separability.c_sep, config.separability.eps2);
  json off = json::array();
  for (const auto& v : rep.offending)
    off.push_back({{"player", v.player + 1}, {"channel", v.channel + 1},
                   {"occupancies", {v.occupancy_a, v.occupancy_b}}, {"gap", v.gap}});
  j["separability"] = {{"nu_min", rep.nu_min ? json(*rep.nu_min) : json(nullptr)},
                       {"threshold", rep.threshold},
                       {"passed", rep.passed},
                       {"offending", off}};
  return j;
}

ChainAnalysis analyze_chain(const RunConfig& config, const std::vector<double>& eps_grid) {
  const int beta = config.schedule.beta.value_or(config.table.max_occupancy());
  std::vector<EstimateTable> est;
  for (int j = 0; j < config.table.num_players(); ++j)
    est.push_back(EstimateTable::exact(config.table, j, beta));
  ChainModel model(config.table, std::move(est), config.chain.state_cap);
  const auto sol = solve_matching(config.table, config.enumeration_cap);
  const double exp_c = config.schedule.exp_c.value_or(
      static_cast<double>(config.table.num_channels()) * config.table.max_occupancy() + 1.0);
  UtilityModel utility{config.chain.p_eps};
  auto stability = stability_report(model, sol.optimal_profile, eps_grid, exp_c, utility);
  auto classes = recurrence_classes(model.build_kernel(0.0, exp_c, utility));
  return {std::move(stability), std::move(classes), std::move(model)};
}

void write_stability_csv(const ChainAnalysis& analysis, std::ostream& out) {
  const auto& rep = analysis.stability;
  out << "eps,pi_optimal,pi_content,pi_discontent,residual";
  for (const auto& p : rep.profiles) {
    std::string name = "pi_";
    for (std::size_t j = 0; j < p.size(); ++j) name += (j ? "_" : "") + std::to_string(p[j] + 1);
    out << "," << name;
  }
  out << "\n";
  for (const auto& row : rep.rows) {
    out << fmt_double(row.eps) << "," << fmt_double(row.pi_optimal) << ","
        << fmt_double(row.pi_content) << "," << fmt_double(row.pi_discontent) << ","
        << fmt_double(row.residual);
    for (double p : row.pi_singletons) out << "," << fmt_double(p);
    out << "\n";
  }
}

void write_recurrence_text(const ChainAnalysis& analysis, std::ostream& out) {
  const auto& model = analysis.model;
  out << "states: " << model.num_states() << "\n";
  out << "recurrent_classes: " << analysis.recurrent_classes.size() << "\n";
  for (std::size_t c = 0; c < analysis.recurrent_classes.size(); ++c) {
    const auto& cls = analysis.recurrent_classes[c];
    const bool discontent = std::all_of(cls.begin(), cls.end(),
                                        [&](std::size_t s) { return model.all_discontent(s); });
    const char* kind = discontent ? "all-discontent"
                       : (cls.size() == 1 && model.aligned_content(cls.front()))
                           ? "aligned-content"
                           : "other";
    out << "class " << c + 1 << " (" << kind << ", " << cls.size() << " states)";
    if (cls.size() == 1) out << ": " << model.describe(cls.front());
    out << "\n";
  }
  out << "stochastic_stability_majority: " << (analysis.stability.majority_reached ? "true" : "false")
      << "\n";
}

}  // namespace mpmab
