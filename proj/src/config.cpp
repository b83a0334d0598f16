#include "mpmab/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mpmab {

namespace {

using nlohmann::json;

// Reads optional typed fields, recording type errors with their path.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  template <typename T>
  std::optional<T> get(const json& obj, const std::string& section,
                       const std::string& key) {
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null())
      return std::nullopt;
    try {
      return obj.at(key).get<T>();
    } catch (const json::exception&) {
      errors_.push_back(section + "." + key + ": wrong type");
      return std::nullopt;
    }
  }

  const json& section(const json& root, const std::string& name) {
    static const json empty = json::object();
    if (!root.contains(name)) return empty;
    if (!root.at(name).is_object()) {
      errors_.push_back(name + ": must be a table");
      return empty;
    }
    return root.at(name);
  }

 private:
  std::vector<std::string>& errors_;
};

}  // namespace

ValidationResult validate_config(const std::string& text) {
  ValidationResult result;
  auto& errors = result.errors;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    errors.push_back(std::string("config: parse error: ") + e.what());
    return result;
  }
  if (!root.is_object()) {
    errors.push_back("config: top level must be a table");
    return result;
  }

  Reader r(errors);
  RunConfig cfg;
  cfg.source_text = text;

  const json& inst = r.section(root, "instance");
  const auto K = r.get<int>(inst, "instance", "K");
  const auto M = r.get<int>(inst, "instance", "M");
  const auto N = r.get<int>(inst, "instance", "N");
  const auto mu = r.get<std::vector<std::vector<double>>>(inst, "instance", "mu");
  if (!K) errors.push_back("instance.K: required");
  if (!M) errors.push_back("instance.M: required");
  if (!N) errors.push_back("instance.N: required");
  if (!mu) errors.push_back("instance.mu: required");
  if (!errors.empty()) return result;
  auto table_errors = MeanRewardTable::validation_errors(*K, *M, *N, *mu);
  errors.insert(errors.end(), table_errors.begin(), table_errors.end());

  const json& rew = r.section(root, "reward");
  cfg.reward.sigma = r.get<double>(rew, "reward", "sigma").value_or(0.05);
  if (!(cfg.reward.sigma >= 0.0)) errors.push_back("reward.sigma: must be nonnegative");
  try {
    cfg.reward.kind = parse_noise_kind(
        r.get<std::string>(rew, "reward", "noise_kind").value_or("truncated-gaussian"));
  } catch (const std::invalid_argument& e) {
    errors.push_back(std::string("reward.noise_kind: ") + e.what());
  }

  const json& sch = r.section(root, "schedule");
  auto& sp = cfg.schedule;
  sp.T0 = r.get<std::int64_t>(sch, "schedule", "T0");
  sp.c2 = r.get<double>(sch, "schedule", "c2").value_or(sp.c2);
  sp.c3 = r.get<double>(sch, "schedule", "c3").value_or(sp.c3);
  sp.c_eps = r.get<std::int64_t>(sch, "schedule", "c_eps");
  sp.delta = r.get<double>(sch, "schedule", "delta").value_or(sp.delta);
  sp.rho = r.get<double>(sch, "schedule", "rho").value_or(sp.rho);
  sp.eps = r.get<double>(sch, "schedule", "eps").value_or(sp.eps);
  sp.exp_c = r.get<double>(sch, "schedule", "exp_c");
  sp.beta = r.get<int>(sch, "schedule", "beta");
  sp.reset_each_epoch = r.get<bool>(sch, "schedule", "reset_each_epoch").value_or(false);
  if (*M >= 1 && *N >= 1) {
    auto sched_errors = schedule_errors(sp, *M, *N);
    errors.insert(errors.end(), sched_errors.begin(), sched_errors.end());
  }

  const json& kb = r.section(root, "known_bounds");
  cfg.known_delta = r.get<double>(kb, "known_bounds", "delta");
  cfg.known_nu_min = r.get<double>(kb, "known_bounds", "nu_min");
  if (cfg.known_delta && !(*cfg.known_delta > 0.0))
    errors.push_back("known_bounds.delta: must be positive");
  if (cfg.known_nu_min && !(*cfg.known_nu_min > 0.0))
    errors.push_back("known_bounds.nu_min: must be positive");

  const json& sep = r.section(root, "separability");
  cfg.separability.c_sep = r.get<double>(sep, "separability", "c_sep").value_or(0.1);
  cfg.separability.eps2 = r.get<double>(sep, "separability", "eps2").value_or(0.0025);
  if (!(cfg.separability.c_sep > 0.0)) errors.push_back("separability.c_sep: must be positive");
  if (!(cfg.separability.eps2 > 0.0 && cfg.separability.eps2 < 1.0))
    errors.push_back("separability.eps2: not in (0,1)");

  const json& orc = r.section(root, "oracle");
  cfg.enumeration_cap =
      r.get<std::uint64_t>(orc, "oracle", "enumeration_cap").value_or(kDefaultEnumerationCap);

  const json& ch = r.section(root, "chain");
  cfg.chain.state_cap = r.get<std::size_t>(ch, "chain", "state_cap").value_or(kDefaultStateCap);
  cfg.chain.eps_grid = r.get<std::vector<double>>(ch, "chain", "eps_grid").value_or(cfg.chain.eps_grid);
  cfg.chain.p_eps = r.get<double>(ch, "chain", "p_eps").value_or(0.0);
  for (double e : cfg.chain.eps_grid)
    if (!(e > 0.0 && e < 1.0)) errors.push_back("chain.eps_grid: entries must lie in (0,1)");
  if (!(cfg.chain.p_eps >= 0.0 && cfg.chain.p_eps <= 1.0))
    errors.push_back("chain.p_eps: not in [0,1]");

  const json& run = r.section(root, "run");
  cfg.horizon = r.get<std::int64_t>(run, "run", "horizon").value_or(cfg.horizon);
  cfg.seeds = r.get<std::vector<std::uint64_t>>(run, "run", "seeds").value_or(cfg.seeds);
  if (auto out = r.get<std::string>(run, "run", "out")) cfg.out_dir = *out;
  cfg.jobs = r.get<int>(run, "run", "jobs").value_or(1);
  if (cfg.horizon < 0) errors.push_back("run.horizon: must be nonnegative");
  if (cfg.jobs < 1) errors.push_back("run.jobs: must be >= 1");

  if (!errors.empty()) return result;
  cfg.table = MeanRewardTable(*K, *M, *N, *mu);

  // Report-only checks.
  const auto report = check_separability(cfg.table, cfg.reward.sigma,
                                         cfg.separability.c_sep, cfg.separability.eps2);
  if (!report.passed) {
    std::ostringstream os;
    os << "separability: " << report.offending.size()
       << " occupancy pair(s) closer than threshold " << report.threshold;
    result.warnings.push_back(os.str());
  }
  std::optional<MatchingSolution> solution;
  try {
    solution = solve_matching(cfg.table, cfg.enumeration_cap);
    if (!solution->unique)
      result.warnings.push_back("oracle: optimal matching is not unique (delta = 0)");
    if (cfg.known_delta && *cfg.known_delta > solution->delta)
      result.warnings.push_back("known_bounds.delta: exceeds the true delta");
  } catch (const OracleError& e) {
    result.warnings.push_back(std::string("oracle: ") + e.what() +
                              " (simulation-only mode, no regret)");
    if (!cfg.known_delta && !(sp.T0 && sp.c_eps))
      errors.push_back("known_bounds.delta: required when the oracle cannot run "
                       "and T0/c_eps are not given");
  }
  const auto nu = compute_nu_min(cfg.table);
  if (cfg.known_nu_min && nu && *cfg.known_nu_min > *nu)
    result.warnings.push_back("known_bounds.nu_min: exceeds the true nu_min");
  if (!nu) result.warnings.push_back("nu_min: not applicable (no two nonzero occupancy means); play length uses delta alone");
  if (solution && !solution->unique && !cfg.known_delta && !(sp.T0 && sp.c_eps))
    errors.push_back("known_bounds.delta: required when the optimum is not unique "
                     "and T0/c_eps are not given");

  if (errors.empty()) result.config = std::move(cfg);
  return result;
}

ValidationResult load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ValidationResult result;
    result.errors.push_back("config: cannot open " + path.string());
    return result;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return validate_config(buf.str());
}

}  // namespace mpmab
