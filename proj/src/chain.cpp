#include "mpmab/chain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/SparseLU>

#include "mpmab/oracle.hpp"

namespace mpmab {

ChainModel::ChainModel(const MeanRewardTable& table,
                       std::vector<EstimateTable> estimates, std::size_t state_cap)
    : table_(table), estimates_(std::move(estimates)) {
  const int K = table.num_players();
  const int M = table.num_channels();
  if (estimates_.size() != static_cast<std::size_t>(K))
    throw ChainError("need one estimate table per player");
  for (int j = 0; j < K; ++j) {
    const auto& est = estimates_[static_cast<std::size_t>(j)];
    if (est.num_channels() != M) throw ChainError("estimate table has wrong channel count");
    std::vector<double> values{0.0};
    for (const auto& row : est.levels)
      for (double v : row)
        if (v != 0.0) values.push_back(v);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    utilities_.push_back(std::move(values));
  }

  num_states_ = 1;
  local_size_.resize(static_cast<std::size_t>(K));
  stride_.resize(static_cast<std::size_t>(K));
  for (int j = K; j-- > 0;) {
    const auto u = static_cast<std::size_t>(j);
    local_size_[u] = static_cast<std::size_t>(M) * utilities_[u].size() * 2;
    stride_[u] = num_states_;
    if (num_states_ > state_cap / local_size_[u]) {
      std::ostringstream os;
      os << "chain state space exceeds cap " << state_cap;
      throw ChainError(os.str());
    }
    num_states_ *= local_size_[u];
  }
}

ChainModel ChainModel::exact(const MeanRewardTable& table, std::size_t state_cap) {
  std::vector<EstimateTable> est;
  for (int j = 0; j < table.num_players(); ++j)
    est.push_back(EstimateTable::exact(table, j, table.max_occupancy()));
  return ChainModel(table, std::move(est), state_cap);
}

JointState ChainModel::decode(std::size_t index) const {
  if (index >= num_states_) throw std::out_of_range("state index out of range");
  JointState state(static_cast<std::size_t>(num_players()));
  for (std::size_t j = 0; j < state.size(); ++j) {
    std::size_t local = (index / stride_[j]) % local_size_[j];
    const std::size_t nu = utilities_[j].size();
    state[j].mood = (local % 2 == 0) ? Mood::kContent : Mood::kDiscontent;
    local /= 2;
    state[j].utility = static_cast<int>(local % nu);
    state[j].action = static_cast<Channel>(local / nu);
  }
  return state;
}

std::size_t ChainModel::encode(const JointState& state) const {
  std::size_t index = 0;
  for (std::size_t j = 0; j < state.size(); ++j) {
    const std::size_t nu = utilities_[j].size();
    const std::size_t local =
        (static_cast<std::size_t>(state[j].action) * nu +
         static_cast<std::size_t>(state[j].utility)) * 2 +
        (state[j].mood == Mood::kContent ? 0 : 1);
    index += local * stride_[j];
  }
  return index;
}

int ChainModel::utility_index(int player, double utility) const {
  const auto& values = utilities_[static_cast<std::size_t>(player)];
  const auto it = std::lower_bound(values.begin(), values.end(), utility);
  if (it == values.end() || *it != utility)
    throw ChainError("utility not in the player's utility set");
  return static_cast<int>(it - values.begin());
}

std::size_t ChainModel::encode(const std::vector<PlayerState>& states) const {
  JointState joint;
  for (std::size_t j = 0; j < states.size(); ++j) {
    joint.push_back({states[j].baseline_action,
                     utility_index(static_cast<int>(j), states[j].baseline_utility),
                     states[j].mood});
  }
  return encode(joint);
}

std::vector<UtilityReading> ChainModel::readings(const ActionProfile& profile) const {
  const auto counts = occupancy(profile, num_channels());
  std::vector<UtilityReading> out;
  for (std::size_t j = 0; j < profile.size(); ++j) {
    const double truth = table_.mean(static_cast<int>(j), profile[j], counts[profile[j]]);
    out.push_back(utility_from_estimate(estimates_[j], profile[j], truth));
  }
  return out;
}

std::size_t ChainModel::aligned_content_state(const ActionProfile& profile) const {
  const auto r = readings(profile);
  JointState state;
  for (std::size_t j = 0; j < profile.size(); ++j)
    state.push_back({profile[j], utility_index(static_cast<int>(j), r[j].utility),
                     Mood::kContent});
  return encode(state);
}

bool ChainModel::all_discontent(std::size_t index) const {
  const auto s = decode(index);
  return std::all_of(s.begin(), s.end(),
                     [](const LocalState& l) { return l.mood == Mood::kDiscontent; });
}

bool ChainModel::aligned_content(std::size_t index) const {
  const auto s = decode(index);
  ActionProfile profile;
  for (const auto& l : s) {
    if (l.mood != Mood::kContent) return false;
    profile.push_back(l.action);
  }
  return aligned_content_state(profile) == index;
}

std::vector<ChainModel::Outcome> ChainModel::local_outcomes(
    int player, const LocalState& current, Channel action,
    const UtilityReading& exact, double eps, const UtilityModel& model) const {
  const auto& values = utilities_[static_cast<std::size_t>(player)];
  std::vector<std::pair<UtilityReading, double>> reads{{exact, 1.0}};
  if (model.p_eps > 0.0 && exact.level >= 0) {
    const auto& row = estimates_[static_cast<std::size_t>(player)]
                          .levels[static_cast<std::size_t>(action)];
    UtilityReading other;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < row.size(); ++n) {
      if (row[n] == 0.0 || static_cast<int>(n) == exact.level) continue;
      const double d = std::abs(row[n] - exact.utility);
      if (d < best) {
        best = d;
        other = {static_cast<int>(n), row[n]};
      }
    }
    if (other.level >= 0) {
      reads[0].second = 1.0 - model.p_eps;
      reads.push_back({other, model.p_eps});
    }
  }

  std::vector<Outcome> out;
  for (const auto& [reading, weight] : reads) {
    if (current.mood == Mood::kContent && action == current.action &&
        reading.utility == values[static_cast<std::size_t>(current.utility)]) {
      out.push_back({current, weight});
      continue;
    }
    const int u = utility_index(player, reading.utility);
    const double accept = acceptance_probability(eps, reading.utility);
    if (accept > 0.0) out.push_back({{action, u, Mood::kContent}, weight * accept});
    if (accept < 1.0) out.push_back({{action, u, Mood::kDiscontent}, weight * (1.0 - accept)});
  }
  return out;
}

TransitionMatrix ChainModel::build_kernel(double eps, double exp_c,
                                          const UtilityModel& model) const {
  if (!(eps >= 0.0 && eps < 1.0)) throw ChainError("eps must lie in [0,1)");
  if (!(model.p_eps >= 0.0 && model.p_eps <= 1.0)) throw ChainError("p_eps must lie in [0,1]");
  const int K = num_players();
  const int M = num_channels();
  const double experiment = std::pow(eps, exp_c);

  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<std::pair<std::size_t, double>> row;
  std::vector<std::vector<Outcome>> per_player(static_cast<std::size_t>(K));
  std::vector<std::vector<double>> action_probs(static_cast<std::size_t>(K));

  for (std::size_t s = 0; s < num_states_; ++s) {
    const JointState state = decode(s);
    for (int j = 0; j < K; ++j) {
      PlayerState ps;
      ps.baseline_action = state[static_cast<std::size_t>(j)].action;
      ps.mood = state[static_cast<std::size_t>(j)].mood;
      action_probs[static_cast<std::size_t>(j)] = action_probabilities(ps, M, experiment);
    }
    row.clear();
    ActionProfile profile(static_cast<std::size_t>(K), 0);
    do {
      double p_profile = 1.0;
      for (int j = 0; j < K && p_profile > 0.0; ++j)
        p_profile *= action_probs[static_cast<std::size_t>(j)]
                                 [static_cast<std::size_t>(profile[static_cast<std::size_t>(j)])];
      if (p_profile <= 0.0) continue;
      const auto reads = readings(profile);
      for (int j = 0; j < K; ++j) {
        const auto u = static_cast<std::size_t>(j);
        per_player[u] = local_outcomes(j, state[u], profile[u], reads[u], eps, model);
      }
      // Cartesian product of independent per-player outcomes.
      std::vector<std::size_t> pick(static_cast<std::size_t>(K), 0);
      while (true) {
        double p = p_profile;
        std::size_t target = 0;
        for (std::size_t j = 0; j < pick.size(); ++j) {
          const auto& o = per_player[j][pick[j]];
          p *= o.prob;
          const std::size_t nu = utilities_[j].size();
          const std::size_t local =
              (static_cast<std::size_t>(o.next.action) * nu +
               static_cast<std::size_t>(o.next.utility)) * 2 +
              (o.next.mood == Mood::kContent ? 0 : 1);
          target += local * stride_[j];
        }
        if (p > 0.0) row.emplace_back(target, p);
        std::size_t j = pick.size();
        while (j-- > 0) {
          if (++pick[j] < per_player[j].size()) break;
          pick[j] = 0;
        }
        if (j == static_cast<std::size_t>(-1)) break;
      }
    } while (next_profile(profile, M));

    std::sort(row.begin(), row.end());
    for (std::size_t i = 0; i < row.size();) {
      double total = 0.0;
      std::size_t k = i;
      for (; k < row.size() && row[k].first == row[i].first; ++k) total += row[k].second;
      triplets.emplace_back(static_cast<int>(s), static_cast<int>(row[i].first), total);
      i = k;
    }
  }
  TransitionMatrix kernel(static_cast<Eigen::Index>(num_states_),
                          static_cast<Eigen::Index>(num_states_));
  kernel.setFromTriplets(triplets.begin(), triplets.end());
  kernel.makeCompressed();
  return kernel;
}

std::string ChainModel::describe(std::size_t index) const {
  const auto s = decode(index);
  std::ostringstream os;
  os << "[";
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (j) os << " ";
    os << "(" << s[j].action + 1 << ","
       << utilities_[j][static_cast<std::size_t>(s[j].utility)] << ","
       << mood_char(s[j].mood) << ")";
  }
  os << "]";
  return os.str();
}

double max_row_sum_error(const TransitionMatrix& kernel) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < kernel.outerSize(); ++r) {
    double sum = 0.0;
    for (TransitionMatrix::InnerIterator it(kernel, r); it; ++it) sum += it.value();
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

std::vector<std::vector<std::size_t>> strongly_connected_components(
    const TransitionMatrix& kernel) {
  const auto n = static_cast<std::size_t>(kernel.rows());
  constexpr std::size_t kUnvisited = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(n, kUnvisited), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> components;
  std::size_t counter = 0;

  struct Frame {
    std::size_t v;
    TransitionMatrix::InnerIterator it;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnvisited) continue;
    std::vector<Frame> frames;
    auto open = [&](std::size_t v) {
      index[v] = low[v] = counter++;
      stack.push_back(v);
      on_stack[v] = true;
      frames.push_back({v, TransitionMatrix::InnerIterator(kernel, static_cast<Eigen::Index>(v))});
    };
    open(root);
    while (!frames.empty()) {
      auto& f = frames.back();
      if (f.it) {
        const auto w = static_cast<std::size_t>(f.it.col());
        ++f.it;
        if (index[w] == kUnvisited) {
          open(w);
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
        continue;
      }
      const std::size_t v = f.v;
      frames.pop_back();
      if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v]);
      if (low[v] == index[v]) {
        std::vector<std::size_t> comp;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        components.push_back(std::move(comp));
      }
    }
  }
  return components;
}

std::vector<std::vector<std::size_t>> recurrence_classes(const TransitionMatrix& kernel) {
  auto components = strongly_connected_components(kernel);
  std::vector<std::size_t> owner(static_cast<std::size_t>(kernel.rows()));
  for (std::size_t c = 0; c < components.size(); ++c)
    for (auto v : components[c]) owner[v] = c;

  std::vector<std::vector<std::size_t>> closed;
  for (std::size_t c = 0; c < components.size(); ++c) {
    bool leaks = false;
    for (auto v : components[c]) {
      for (TransitionMatrix::InnerIterator it(kernel, static_cast<Eigen::Index>(v)); it; ++it)
        if (it.value() > 0.0 && owner[static_cast<std::size_t>(it.col())] != c) leaks = true;
      if (leaks) break;
    }
    if (!leaks) closed.push_back(components[c]);
  }
  std::sort(closed.begin(), closed.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return closed;
}

namespace {

double stationarity_residual(const TransitionMatrix& kernel, const Eigen::VectorXd& pi) {
  const Eigen::VectorXd next = kernel.transpose() * pi;
  return (next - pi).lpNorm<1>();
}

}  // namespace

StationaryResult stationary_distribution(const TransitionMatrix& kernel,
                                         const StationaryOptions& options) {
  const Eigen::Index n = kernel.rows();
  StationaryResult result;
  if (n == 0) throw ChainError("empty kernel");
  if (const auto classes = recurrence_classes(kernel); classes.size() != 1) {
    std::ostringstream os;
    os << "stationary distribution is not unique: " << classes.size() << " closed classes";
    throw ChainError(os.str());
  }

  if (static_cast<std::size_t>(n) <= options.direct_limit) {
    // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    Eigen::SparseMatrix<double> a = kernel.transpose();
    std::vector<Eigen::Triplet<double>> triplets;
    for (Eigen::Index c = 0; c < a.outerSize(); ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator it(a, c); it; ++it)
        if (it.row() != n - 1) triplets.emplace_back(it.row(), it.col(), it.value());
    for (Eigen::Index i = 0; i < n - 1; ++i) triplets.emplace_back(i, i, -1.0);
    for (Eigen::Index i = 0; i < n; ++i) triplets.emplace_back(n - 1, i, 1.0);
    Eigen::SparseMatrix<double> system(n, n);
    system.setFromTriplets(triplets.begin(), triplets.end());
    system.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(system);
    if (lu.info() != Eigen::Success)
      throw ChainError("stationary solve failed: singular system (more than one recurrent class?)");
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(n - 1) = 1.0;
    result.pi = lu.solve(rhs);
    // Clean rounding noise on transient states.
    for (Eigen::Index i = 0; i < n; ++i)
      if (result.pi(i) < 0.0 && result.pi(i) > -1e-13) result.pi(i) = 0.0;
    result.pi /= result.pi.sum();
    result.direct = true;
  } else {
    result.direct = false;
    Eigen::VectorXd pi = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    const TransitionMatrix pt = kernel.transpose();
    double delta = 0.0;
    for (result.iterations = 1; result.iterations <= options.max_iterations; ++result.iterations) {
      Eigen::VectorXd next = pt * pi;
      next /= next.sum();
      delta = (next - pi).lpNorm<1>();
      pi = std::move(next);
      if (delta < options.tolerance) break;
    }
    result.pi = std::move(pi);
    if (delta >= options.tolerance) {
      std::ostringstream os;
      os << "power iteration did not converge: residual " << delta << " after "
         << options.max_iterations << " iterations";
      throw ChainError(os.str());
    }
  }
  result.residual = stationarity_residual(kernel, result.pi);
  return result;
}

StabilityReport stability_report(const ChainModel& model,
                                 const ActionProfile& optimal_profile,
                                 const std::vector<double>& eps_grid,
                                 double exp_c, const UtilityModel& utility) {
  StabilityReport report;
  report.optimal_profile = optimal_profile;
  std::vector<std::size_t> singletons;
  ActionProfile profile(static_cast<std::size_t>(model.num_players()), 0);
  do {
    report.profiles.push_back(profile);
    singletons.push_back(model.aligned_content_state(profile));
  } while (next_profile(profile, model.num_channels()));
  const std::size_t optimal = model.aligned_content_state(optimal_profile);

  std::vector<bool> discontent(model.num_states());
  for (std::size_t s = 0; s < model.num_states(); ++s) discontent[s] = model.all_discontent(s);

  for (double eps : eps_grid) {
    const auto kernel = model.build_kernel(eps, exp_c, utility);
    const auto solved = stationary_distribution(kernel);
    StabilityRow row;
    row.eps = eps;
    row.residual = solved.residual;
    row.pi_optimal = solved.pi(static_cast<Eigen::Index>(optimal));
    for (auto s : singletons) {
      const double p = solved.pi(static_cast<Eigen::Index>(s));
      row.pi_singletons.push_back(p);
      row.pi_content += p;
    }
    for (std::size_t s = 0; s < model.num_states(); ++s)
      if (discontent[s]) row.pi_discontent += solved.pi(static_cast<Eigen::Index>(s));
    report.majority_reached = report.majority_reached || row.pi_optimal > 0.5;
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace mpmab
