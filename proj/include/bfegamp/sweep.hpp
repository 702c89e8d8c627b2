#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "bfegamp/gamp.hpp"
#include "bfegamp/problem.hpp"
#include "bfegamp/solver.hpp"

namespace bfegamp {

enum class Experiment { ratio_sweep, kappa_sweep_awgn, kappa_sweep_onebit };

enum class SolverKind { admm_gamp, gamp, genie };

inline const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::ratio_sweep:
      return "ratio_sweep";
    case Experiment::kappa_sweep_awgn:
      return "kappa_sweep_awgn";
    default:
      return "kappa_sweep_onebit";
  }
}

inline const char* to_string(SolverKind s) {
  switch (s) {
    case SolverKind::admm_gamp:
      return "admm_gamp";
    case SolverKind::gamp:
      return "gamp";
    default:
      return "genie";
  }
}

struct SweepConfig {
  Experiment experiment = Experiment::ratio_sweep;
  std::size_t n = 200;
  std::size_t m_override = 0;  // 0: ratio point * n, or 0.6 n / 2 n for kappa sweeps
  Vec grid;                    // m/n ratios or kappa values
  int trials = 20;
  double snr_db = 30.0;
  double rho = 0.2;
  double sx = 1.0;
  std::uint64_t base_seed = 1;
  std::vector<SolverKind> solvers = {SolverKind::admm_gamp, SolverKind::gamp, SolverKind::genie};
  // solver schedule
  int inner_per_outer = 10;
  int cg_iters = 3;
  int max_total_iters = 200;
  double term_tol = 1e-4;
  double gap_tol = 0.0;
  Vec theta_ladder = {1.0, 0.5, 0.1};
};

struct TrialRow {
  std::string experiment;
  double point = 0.0;
  std::string solver;
  int trial = 0;
  std::uint64_t seed = 0;
  double nmse_db = 0.0;
  long iters = 0;
  bool diverged = false;
  double moment_gap = 0.0, dual_gap = 0.0, variance_gap = 0.0;
  double wall_ms = 0.0;
};

struct SummaryRow {
  std::string experiment;
  double point = 0.0;
  std::string solver;
  int trials = 0;
  double mean_nmse_db = 0.0;  // diverged trials contribute exactly 0 dB
  int diverged = 0;
};

struct SweepResult {
  std::vector<TrialRow> rows;
  std::vector<SummaryRow> summary;
  std::vector<std::string> errors;  // per-point or per-trial failures, non-fatal
};

// Instance seed for one (point, trial) cell.
inline std::uint64_t cell_seed(std::uint64_t base, std::size_t point_idx, int trial) {
  std::uint64_t sm = (point_idx + 1) * 0x9e3779b97f4a7c15ULL +
                     (static_cast<std::uint64_t>(trial) + 1) * 0xbf58476d1ce4e5b9ULL;
  return base ^ splitmix64_next(sm);
}

inline std::size_t sweep_m(const SweepConfig& cfg, double point) {
  if (cfg.m_override > 0) return cfg.m_override;
  switch (cfg.experiment) {
    case Experiment::ratio_sweep:
      return static_cast<std::size_t>(std::lround(point * static_cast<double>(cfg.n)));
    case Experiment::kappa_sweep_awgn:
      return static_cast<std::size_t>(std::lround(0.6 * static_cast<double>(cfg.n)));
    default:
      return 2 * cfg.n;
  }
}

inline GlmProblem make_sweep_instance(const SweepConfig& cfg, double point, std::uint64_t seed) {
  const std::size_t m = sweep_m(cfg, point);
  GlmProblem prob;
  if (cfg.experiment == Experiment::ratio_sweep) {
    prob.a = iid_gaussian_matrix(m, cfg.n, seed);
  } else {
    prob.a = build_spectral_matrix({m, cfg.n, point, seed});
  }
  auto sig = gen_bg_signal(cfg.n, cfg.rho, cfg.sx, seed);
  prob.x_true = std::move(sig.x);
  prob.support = std::move(sig.support);
  prob.has_truth = true;
  prob.prior.assign(cfg.n, PenaltySpec::bernoulli_gaussian(cfg.rho, cfg.sx));
  if (cfg.experiment == Experiment::kappa_sweep_onebit) {
    prob.y = gen_onebit_problem(prob.x_true, prob.a);
    prob.likelihood.reserve(m);
    for (std::size_t i = 0; i < m; ++i) prob.likelihood.push_back(PenaltySpec::one_bit_output(prob.y[i]));
  } else {
    auto obs = gen_awgn_problem(prob.x_true, prob.a, cfg.snr_db, seed);
    prob.y = std::move(obs.y);
    prob.likelihood.reserve(m);
    for (std::size_t i = 0; i < m; ++i)
      prob.likelihood.push_back(PenaltySpec::gaussian_output(prob.y[i], obs.sigma2));
  }
  return prob;
}

namespace detail {

inline SolverConfig sweep_solver_config(const SweepConfig& cfg) {
  SolverConfig sc;
  sc.inner_per_outer = cfg.inner_per_outer;
  sc.cg_iters = cfg.cg_iters;
  sc.max_total_iters = cfg.max_total_iters;
  sc.term_tol = cfg.term_tol;
  sc.gap_tol = cfg.gap_tol;
  sc.mode = EstimatorMode::mmse;
  return sc;
}

inline TrialRow run_one_solver(const SweepConfig& cfg, const GlmProblem& prob, SolverKind kind,
                               double point, int trial, std::uint64_t seed) {
  TrialRow row;
  row.experiment = to_string(cfg.experiment);
  row.point = point;
  row.solver = to_string(kind);
  row.trial = trial;
  row.seed = seed;
  const bool onebit = cfg.experiment == Experiment::kappa_sweep_onebit;
  const auto t0 = std::chrono::steady_clock::now();
  if (kind == SolverKind::genie) {
    double sigma2 = prob.likelihood.empty() ? 0.0 : prob.likelihood.front().sigma2();
    const Vec xhat = genie_mmse(prob.a, prob.y, prob.support, cfg.sx, sigma2);
    row.nmse_db = nmse_db(prob.x_true, xhat, onebit);
  } else if (kind == SolverKind::gamp) {
    SolverConfig sc = sweep_solver_config(cfg);
    const auto rep = gamp_solve(prob.a, make_prior_estimator(prob, EstimatorMode::mmse),
                                make_output_estimator(prob, EstimatorMode::mmse), sc,
                                &prob.x_true, seed);
    row.nmse_db = rep.diverged ? 0.0 : nmse_db(prob.x_true, rep.x_hat, onebit);
    row.iters = rep.iterations_used;
    row.diverged = rep.diverged;
    row.moment_gap = rep.residuals.moment_gap;
  } else {
    SolverConfig sc = sweep_solver_config(cfg);
    RunReport rep;
    bool ok = false;
    for (double theta : cfg.theta_ladder) {
      sc.theta = theta;
      AdmmGampSolver solver(prob.a, make_prior_estimator(prob, EstimatorMode::mmse),
                            make_output_estimator(prob, EstimatorMode::mmse), sc);
      rep = solver.solve(&prob.x_true, seed);
      if (rep.converged && !rep.diverged) {
        ok = true;
        break;
      }
    }
    (void)ok;
    row.nmse_db = rep.diverged ? 0.0 : nmse_db(prob.x_true, rep.x_hat, onebit);
    row.iters = rep.iterations_used;
    row.diverged = rep.diverged || !rep.converged;
    row.moment_gap = rep.residuals.moment_gap;
    row.dual_gap = rep.residuals.dual_gap;
    row.variance_gap = rep.residuals.variance_gap;
  }
  row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

}  // namespace detail

// Grid x trial Monte-Carlo sweep; cells run on a small work pool and results
// land in preassigned slots, so output order never depends on scheduling.
inline SweepResult monte_carlo_sweep(const SweepConfig& cfg, int threads = 1) {
  if (cfg.grid.empty()) throw std::invalid_argument("monte_carlo_sweep: empty grid");
  if (cfg.trials < 1) throw std::invalid_argument("monte_carlo_sweep: trials must be >= 1");
  SweepResult result;
  const std::size_t cells = cfg.grid.size() * static_cast<std::size_t>(cfg.trials);
  std::vector<std::vector<TrialRow>> slots(cells);
  std::vector<std::string> cell_errors(cells);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= cells) return;
      const std::size_t point_idx = c / cfg.trials;
      const int trial = static_cast<int>(c % cfg.trials);
      const double point = cfg.grid[point_idx];
      const std::uint64_t seed = cell_seed(cfg.base_seed, point_idx, trial);
      try {
        const GlmProblem prob = make_sweep_instance(cfg, point, seed);
        for (SolverKind kind : cfg.solvers) {
          if (kind == SolverKind::genie && cfg.experiment == Experiment::kappa_sweep_onebit)
            continue;  // no genie construction for one-bit measurements
          slots[c].push_back(detail::run_one_solver(cfg, prob, kind, point, trial, seed));
        }
      } catch (const std::exception& e) {
        std::ostringstream os;
        os << to_string(cfg.experiment) << " point=" << point << " trial=" << trial << ": " << e.what();
        cell_errors[c] = os.str();
      }
    }
  };

  const int nthreads = std::max(1, threads);
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (std::size_t c = 0; c < cells; ++c) {
    for (auto& row : slots[c]) result.rows.push_back(std::move(row));
    if (!cell_errors[c].empty()) result.errors.push_back(std::move(cell_errors[c]));
  }

  // aggregate means with the 0 dB cap for diverged runs
  for (std::size_t point_idx = 0; point_idx < cfg.grid.size(); ++point_idx) {
    for (SolverKind kind : cfg.solvers) {
      if (kind == SolverKind::genie && cfg.experiment == Experiment::kappa_sweep_onebit) continue;
      SummaryRow srow;
      srow.experiment = to_string(cfg.experiment);
      srow.point = cfg.grid[point_idx];
      srow.solver = to_string(kind);
      double acc = 0.0;
      for (const auto& row : result.rows) {
        if (row.point == cfg.grid[point_idx] && row.solver == to_string(kind)) {
          acc += row.diverged ? 0.0 : row.nmse_db;
          ++srow.trials;
          srow.diverged += row.diverged ? 1 : 0;
        }
      }
      if (srow.trials > 0) {
        srow.mean_nmse_db = acc / srow.trials;
        result.summary.push_back(srow);
      }
    }
  }
  return result;
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace detail

inline void write_trials_csv(std::ostream& os, const std::vector<TrialRow>& rows) {
  os << "experiment,point,solver,trial,seed,nmse_db,iters,diverged,moment_gap,dual_gap,variance_gap,wall_ms\n";
  for (const auto& r : rows) {
    os << r.experiment << ',' << detail::fmt_double(r.point) << ',' << r.solver << ',' << r.trial
       << ',' << r.seed << ',' << detail::fmt_double(r.nmse_db) << ',' << r.iters << ','
       << (r.diverged ? 1 : 0) << ',' << detail::fmt_double(r.moment_gap) << ','
       << detail::fmt_double(r.dual_gap) << ',' << detail::fmt_double(r.variance_gap) << ','
       << detail::fmt_double(r.wall_ms) << '\n';
  }
}

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "experiment,point,solver,trials,mean_nmse_db,diverged\n";
  for (const auto& r : rows) {
    os << r.experiment << ',' << detail::fmt_double(r.point) << ',' << r.solver << ',' << r.trials
       << ',' << detail::fmt_double(r.mean_nmse_db) << ',' << r.diverged << '\n';
  }
}

// Flat `key = value` config with '#' comments, one experiment per file.
inline std::map<std::string, std::string> parse_config_text(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = value;
  }
  return kv;
}

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

inline SweepConfig sweep_config_from_text(std::istream& is) {
  const auto kv = parse_config_text(is);
  SweepConfig cfg;
  auto parse_double = [&](const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("");
      return d;
    } catch (...) {
      throw ConfigError("config: bad numeric value for key '" + key + "'");
    }
  };
  auto parse_list = [&](const std::string& key, const std::string& v) {
    Vec out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.find_first_not_of(" \t") == std::string::npos) continue;
      out.push_back(parse_double(key, item.substr(item.find_first_not_of(" \t"),
                                                  item.find_last_not_of(" \t") -
                                                      item.find_first_not_of(" \t") + 1)));
    }
    if (out.empty()) throw ConfigError("config: empty list for key '" + key + "'");
    return out;
  };
  for (const auto& [key, value] : kv) {
    if (key == "experiment") {
      if (value == "ratio_sweep")
        cfg.experiment = Experiment::ratio_sweep;
      else if (value == "kappa_sweep_awgn")
        cfg.experiment = Experiment::kappa_sweep_awgn;
      else if (value == "kappa_sweep_onebit")
        cfg.experiment = Experiment::kappa_sweep_onebit;
      else
        throw ConfigError("config: unknown experiment '" + value + "' for key 'experiment'");
    } else if (key == "n") {
      cfg.n = static_cast<std::size_t>(parse_double(key, value));
    } else if (key == "m") {
      cfg.m_override = static_cast<std::size_t>(parse_double(key, value));
    } else if (key == "grid") {
      cfg.grid = parse_list(key, value);
    } else if (key == "trials") {
      cfg.trials = static_cast<int>(parse_double(key, value));
    } else if (key == "snr_db") {
      cfg.snr_db = parse_double(key, value);
    } else if (key == "rho") {
      cfg.rho = parse_double(key, value);
    } else if (key == "sx") {
      cfg.sx = parse_double(key, value);
    } else if (key == "base_seed") {
      cfg.base_seed = static_cast<std::uint64_t>(parse_double(key, value));
    } else if (key == "solvers") {
      cfg.solvers.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        auto trim = [](std::string s) {
          const auto b = s.find_first_not_of(" \t");
          const auto e = s.find_last_not_of(" \t");
          return (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string name = trim(item);
        if (name == "admm_gamp")
          cfg.solvers.push_back(SolverKind::admm_gamp);
        else if (name == "gamp")
          cfg.solvers.push_back(SolverKind::gamp);
        else if (name == "genie")
          cfg.solvers.push_back(SolverKind::genie);
        else if (!name.empty())
          throw ConfigError("config: unknown solver '" + name + "' for key 'solvers'");
      }
      if (cfg.solvers.empty()) throw ConfigError("config: empty list for key 'solvers'");
    } else if (key == "inner_per_outer") {
      cfg.inner_per_outer = static_cast<int>(parse_double(key, value));
    } else if (key == "cg_iters") {
      cfg.cg_iters = static_cast<int>(parse_double(key, value));
    } else if (key == "max_total_iters") {
      cfg.max_total_iters = static_cast<int>(parse_double(key, value));
    } else if (key == "term_tol") {
      cfg.term_tol = parse_double(key, value);
    } else if (key == "gap_tol") {
      cfg.gap_tol = parse_double(key, value);
    } else if (key == "theta_ladder") {
      cfg.theta_ladder = parse_list(key, value);
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  if (cfg.grid.empty()) throw ConfigError("config: missing required key 'grid'");
  return cfg;
}

inline SweepConfig sweep_config_from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open '" + path + "'");
  return sweep_config_from_text(f);
}

}  // namespace bfegamp
