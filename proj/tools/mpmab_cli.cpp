// Command-line front end: validate, oracle, run, sweep, chain-analyze.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mpmab/config.hpp"
#include "mpmab/runner.hpp"

namespace {

std::optional<mpmab::RunConfig> load_or_report(const std::string& path) {
  const auto result = mpmab::load_config(path);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& e : result.errors) std::cerr << "error: " << e << "\n";
  if (!result.ok()) return std::nullopt;
  return result.config;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed multi-player bandit simulator for uncoordinated spectrum access"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::optional<std::int64_t> horizon;
  std::optional<std::string> out_dir;
  std::vector<double> eps_grid;
  int jobs = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Instance configuration (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
  };

  auto* validate = app.add_subcommand("validate", "Check a configuration");
  add_common(validate);

  auto* oracle = app.add_subcommand("oracle", "Brute-force optimum, delta, nu_min, separability");
  add_common(oracle);
  oracle->add_option("--out", out_dir, "Also write oracle.json into this directory");

  auto* run = app.add_subcommand("run", "Simulate the protocol for each seed");
  add_common(run);
  run->add_option("--seed", seeds, "Seeds (comma separated)")->delimiter(',');
  run->add_option("--horizon", horizon, "Time horizon T");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--jobs", jobs, "Concurrent seeds");

  std::string sweep_param = "eps";
  std::vector<double> values;
  auto* sweep = app.add_subcommand("sweep", "Grid over eps, sigma or horizon");
  add_common(sweep);
  sweep->add_option("--param", sweep_param, "eps | sigma | horizon");
  sweep->add_option("--values", values, "Grid values (comma separated)")->delimiter(',');
  sweep->add_option("--eps-grid", eps_grid, "Shorthand for --param eps --values ...")->delimiter(',');
  sweep->add_option("--seed", seeds, "Seeds (comma separated)")->delimiter(',');
  sweep->add_option("--horizon", horizon, "Time horizon T");
  sweep->add_option("--out", out_dir, "Output directory");
  sweep->add_option("--jobs", jobs, "Concurrent grid points");

  auto* chain = app.add_subcommand("chain-analyze", "Exact Markov-chain analysis of the matching dynamics");
  add_common(chain);
  chain->add_option("--eps-grid", eps_grid, "Perturbation values (comma separated)")->delimiter(',');
  chain->add_option("--out", out_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    auto config = load_or_report(config_path);
    if (!config) return 2;
    const std::optional<std::filesystem::path> out_flag =
        out_dir ? std::optional<std::filesystem::path>(*out_dir) : std::nullopt;
    if (seeds.empty()) seeds = config->seeds;
    const std::int64_t T = horizon.value_or(config->horizon);
    const int workers = jobs > 0 ? jobs : config->jobs;

    if (*validate) {
      std::cout << "valid\n";
      return 0;
    }
    if (*oracle) {
      std::cout << mpmab::oracle_text(*config);
      std::cout << "json: " << mpmab::oracle_json(*config).dump() << "\n";
      if (out_flag) {
        std::filesystem::create_directories(*out_flag);
        write_file(*out_flag / "oracle.json", mpmab::oracle_json(*config).dump(2) + "\n");
      }
      return 0;
    }
    if (*run) {
      const auto dir = mpmab::resolve_out_dir(out_flag, *config);
      const auto exp = mpmab::Experiment::prepare(*config);
      const auto outcomes = mpmab::run_experiment(exp, seeds, T, dir, workers);
      std::size_t optimal = 0;
      for (const auto& o : outcomes) {
        optimal += o.final_optimal;
        std::cout << "seed " << o.seed << ": final "
                  << (o.final_profile ? mpmab::format_profile(*o.final_profile) : "none")
                  << " regret " << o.total_regret << "\n";
      }
      if (exp.oracle)
        std::cout << "final profile optimal in " << optimal << "/" << outcomes.size() << " seeds\n";
      std::cout << "wrote " << dir.string() << "\n";
      return 0;
    }
    if (*sweep) {
      auto param = mpmab::parse_sweep_param(sweep_param);
      if (!eps_grid.empty()) {
        param = mpmab::SweepParam::kEps;
        values = eps_grid;
      }
      const auto dir = mpmab::resolve_out_dir(out_flag, *config);
      std::filesystem::create_directories(dir);
      const auto path = dir / "sweep.csv";
      std::ofstream out(path, std::ios::binary);
      mpmab::run_sweep(*config, param, values, seeds, T, out, workers);
      if (!out) throw std::runtime_error("cannot write " + path.string());
      std::cout << "wrote " << path.string() << "\n";
      return 0;
    }
    if (*chain) {
      if (eps_grid.empty()) eps_grid = config->chain.eps_grid;
      const auto analysis = mpmab::analyze_chain(*config, eps_grid);
      mpmab::write_stability_csv(analysis, std::cout);
      mpmab::write_recurrence_text(analysis, std::cout);
      if (out_flag || config->out_dir) {
        const auto dir = mpmab::resolve_out_dir(out_flag, *config);
        std::filesystem::create_directories(dir);
        std::ofstream csv(dir / "stability.csv", std::ios::binary);
        mpmab::write_stability_csv(analysis, csv);
        std::ofstream txt(dir / "recurrence.txt", std::ios::binary);
        mpmab::write_recurrence_text(analysis, txt);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
