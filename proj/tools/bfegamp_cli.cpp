// Benchmark and verification CLI: `run` solves one instance and prints the
// report, `sweep` executes a Monte-Carlo grid from a config file, `verify`
// runs the theorem suites.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bfegamp/suites.hpp"
#include "bfegamp/sweep.hpp"

namespace {

int resolve_threads(int cli_threads) {
  if (const char* env = std::getenv("BFE_GAMP_THREADS")) {
    try {
      const int t = std::stoi(env);
      if (t >= 1) return t;
    } catch (...) {
    }
  }
  return cli_threads >= 1 ? cli_threads : 1;
}

int run_single(const std::string& config_path, std::uint64_t seed, const std::string& solver_list) {
  bfegamp::SweepConfig cfg = bfegamp::sweep_config_from_file(config_path);
  if (seed != 0) cfg.base_seed = seed;
  const double point = cfg.grid.front();
  const std::uint64_t instance_seed = bfegamp::cell_seed(cfg.base_seed, 0, 0);
  const auto prob = bfegamp::make_sweep_instance(cfg, point, instance_seed);
  std::cout << "instance: " << bfegamp::to_string(cfg.experiment) << " point=" << point
            << " n=" << prob.a.cols() << " m=" << prob.a.rows() << " seed=" << instance_seed << "\n";
  std::vector<bfegamp::SolverKind> kinds = cfg.solvers;
  if (!solver_list.empty()) {
    std::stringstream ss(solver_list);
    std::string item;
    kinds.clear();
    while (std::getline(ss, item, ',')) {
      if (item == "admm_gamp") kinds.push_back(bfegamp::SolverKind::admm_gamp);
      else if (item == "gamp") kinds.push_back(bfegamp::SolverKind::gamp);
      else if (item == "genie") kinds.push_back(bfegamp::SolverKind::genie);
      else {
        std::cerr << "unknown solver '" << item << "'\n";
        return 2;
      }
    }
  }
  for (auto kind : kinds) {
    if (kind == bfegamp::SolverKind::genie && cfg.experiment == bfegamp::Experiment::kappa_sweep_onebit)
      continue;
    const auto row = bfegamp::detail::run_one_solver(cfg, prob, kind, point, 0, instance_seed);
    std::cout << row.solver << ": nmse_db=" << row.nmse_db << " iters=" << row.iters
              << " diverged=" << (row.diverged ? 1 : 0) << " gaps=(" << row.moment_gap << ','
              << row.dual_gap << ',' << row.variance_gap << ") wall_ms=" << row.wall_ms << "\n";
  }
  return 0;
}

int run_sweep(const std::string& config_path, const std::string& out_dir, std::uint64_t seed,
              int threads) {
  bfegamp::SweepConfig cfg = bfegamp::sweep_config_from_file(config_path);
  if (seed != 0) cfg.base_seed = seed;
  const auto result = bfegamp::monte_carlo_sweep(cfg, threads);
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream trials(std::filesystem::path(out_dir) / "trials.csv");
    bfegamp::write_trials_csv(trials, result.rows);
  }
  {
    std::ofstream summary(std::filesystem::path(out_dir) / "summary.csv");
    bfegamp::write_summary_csv(summary, result.summary);
  }
  for (const auto& err : result.errors) std::cerr << "note: " << err << "\n";
  std::cout << "wrote " << result.rows.size() << " trial rows, " << result.summary.size()
            << " summary rows to " << out_dir << "\n";
  bfegamp::write_summary_csv(std::cout, result.summary);
  return 0;
}

int run_verify(std::uint64_t seed) {
  const auto reports = bfegamp::run_all_suites(seed == 0 ? 7 : seed);
  bfegamp::print_suite_csv(std::cout, reports);
  bool all_pass = true;
  for (const auto& rep : reports) all_pass = all_pass && rep.passed();
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LSL-BFE minimization benchmark: convergent double-loop GLM inference with a GAMP baseline"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", solver_list;
  std::uint64_t seed = 0;
  int threads = 1;

  auto* run_cmd = app.add_subcommand("run", "solve one instance and print the report");
  run_cmd->add_option("--config", config_path, "instance config file")->required();
  run_cmd->add_option("--seed", seed, "override base seed");
  run_cmd->add_option("--solver", solver_list, "comma-separated solver list");

  auto* sweep_cmd = app.add_subcommand("sweep", "Monte-Carlo grid sweep, writes trials.csv + summary.csv");
  sweep_cmd->add_option("--config", config_path, "sweep config file")->required();
  sweep_cmd->add_option("--out", out_dir, "output directory");
  sweep_cmd->add_option("--seed", seed, "override base seed");
  sweep_cmd->add_option("--threads", threads, "worker threads (env BFE_GAMP_THREADS overrides)");

  auto* verify_cmd = app.add_subcommand("verify", "run the verification suites, print pass/fail table");
  verify_cmd->add_option("--seed", seed, "suite seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run_cmd->parsed()) return run_single(config_path, seed, solver_list);
    if (sweep_cmd->parsed()) return run_sweep(config_path, out_dir, seed, resolve_threads(threads));
    if (verify_cmd->parsed()) return run_verify(seed);
  } catch (const bfegamp::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
