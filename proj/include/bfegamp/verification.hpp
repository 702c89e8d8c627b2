#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfegamp/bfe.hpp"
#include "bfegamp/gamp.hpp"
#include "bfegamp/problem.hpp"
#include "bfegamp/solver.hpp"

namespace bfegamp {

struct SuiteCase {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double threshold = 0.0;
};

struct SuiteReport {
  std::string suite;
  std::vector<SuiteCase> cases;
  double elapsed_seconds = 0.0;

  bool passed() const {
    for (const auto& c : cases)
      if (!c.pass) return false;
    return true;
  }
  void check_below(const std::string& name, double measured, double threshold) {
    cases.push_back({name, measured <= threshold, measured, threshold});
  }
  void check_true(const std::string& name, bool ok) {
    cases.push_back({name, ok, ok ? 1.0 : 0.0, 1.0});
  }
};

inline void print_suite_csv(std::ostream& os, const std::vector<SuiteReport>& reports) {
  os << "suite,case,measured,threshold,pass\n";
  for (const auto& rep : reports)
    for (const auto& c : rep.cases)
      os << rep.suite << ',' << c.name << ',' << std::setprecision(6) << c.measured << ','
         << c.threshold << ',' << (c.pass ? 1 : 0) << '\n';
}

// Max relative error between the centered difference of the mean map and
// variance/tau over a grid of (r, tau) pairs.
inline double finite_difference_check(const ScalarEstimator& g, std::size_t component,
                                      const Vec& grid, const Vec& tau_list, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_check: h must be positive");
  double worst = 0.0;
  for (double tau : tau_list) {
    for (double r : grid) {
      const double up = g.eval(component, r + h, tau).mean;
      const double dn = g.eval(component, r - h, tau).mean;
      const double fd = (up - dn) / (2.0 * h);
      const double gp = g.eval(component, r, tau).variance / tau;
      worst = std::max(worst, std::abs(fd - gp) / (1e-8 + std::abs(gp)));
    }
  }
  return worst;
}

// Independent MAP oracle: gradient descent on f_x(x) + f_z(Ax) with step
// 1/L, L = B ||A||_2^2 + B from power iteration on A^T A.
inline Vec map_reference_solve(const DenseMatrix& a, const std::vector<PenaltySpec>& priors,
                               const std::vector<PenaltySpec>& likelihoods, double tol,
                               int max_iters = 100000) {
  const std::size_t n = a.cols(), m = a.rows();
  double bx = 0.0, bz = 0.0, mu = std::numeric_limits<double>::infinity();
  for (const auto& f : priors) {
    bx = std::max(bx, f.curvature_upper());
    mu = std::min(mu, f.curvature_lower());
  }
  for (const auto& f : likelihoods) bz = std::max(bz, f.curvature_upper());
  const double lam = power_iteration(
      [&](const Vec& w) { return matvec_transposed(a, matvec(a, w)); }, n, 300);
  const double lips = bz * lam + bx;
  Vec x(n, 0.0);
  for (int it = 0; it < max_iters; ++it) {
    Vec ax = matvec(a, x);
    Vec gz(m);
    for (std::size_t i = 0; i < m; ++i) gz[i] = likelihoods[i].fp(ax[i]);
    Vec grad = matvec_transposed(a, gz);
    for (std::size_t j = 0; j < n; ++j) grad[j] += priors[j].fp(x[j]);
    if (norm2(grad) <= tol * (1.0 + norm2(x))) return x;
    for (std::size_t j = 0; j < n; ++j) x[j] -= grad[j] / lips;
  }
  throw std::runtime_error("map_reference_solve: iteration cap exceeded");
}

// Max of d_{t+1}/d_t over the last half of a positive distance sequence.
inline double contraction_rate_estimate(const Vec& distances) {
  if (distances.size() < 10) throw std::invalid_argument("contraction_rate_estimate: need >= 10 points");
  for (double d : distances)
    if (!(d > 0.0)) throw std::invalid_argument("contraction_rate_estimate: distances must be positive");
  const std::size_t start = distances.size() / 2;
  double rate = 0.0;
  for (std::size_t t = start; t + 1 < distances.size(); ++t)
    rate = std::max(rate, distances[t + 1] / distances[t]);
  return rate;
}

// Non-increase of a recorded BFE trajectory, up to 1e-9 numerical slack.
inline SuiteReport bfe_monotonicity_audit(const RunReport& run) {
  SuiteReport rep;
  rep.suite = "bfe_monotonicity";
  if (run.bfe_trajectory.size() < 2) throw std::invalid_argument("bfe_monotonicity_audit: missing trajectory");
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t worst_at = 0;
  for (std::size_t k = 0; k + 1 < run.bfe_trajectory.size(); ++k) {
    const double rise = run.bfe_trajectory[k + 1] - run.bfe_trajectory[k];
    if (rise > worst) {
      worst = rise;
      worst_at = k + 1;
    }
  }
  std::ostringstream name;
  name << "max_rise_at_outer_" << worst_at;
  rep.check_below(name.str(), worst, 1e-9);
  return rep;
}

// Tempered-MMSE means must approach the prox point as T drops: strictly
// decreasing gaps (or all below the noise floor) and a small final gap.
inline SuiteReport hardening_audit(const std::vector<PenaltySpec>& specs, const Vec& grid,
                                   const Vec& tau_list, const Vec& t_list) {
  SuiteReport rep;
  rep.suite = "hardening";
  const double noise_floor = 1e-12;
  int idx = 0;
  for (const auto& spec : specs) {
    double worst_final = 0.0;
    bool monotone = true;
    bool rate_ok = true;
    for (double tau : tau_list) {
      for (double r : grid) {
        const Vec gaps = tempered_limit_check(spec, r, tau, t_list);
        worst_final = std::max(worst_final, gaps.back());
        bool all_tiny = true;
        for (double g : gaps) all_tiny = all_tiny && g < noise_floor;
        if (!all_tiny) {
          for (std::size_t k = 0; k + 1 < gaps.size(); ++k)
            if (!(gaps[k + 1] < gaps[k])) monotone = false;
          if (!(gaps.back() < 10.0 * gaps[gaps.size() - 2] + noise_floor)) rate_ok = false;
        }
      }
    }
    const std::string tag = "family_" + std::to_string(idx++);
    rep.check_true(tag + "_gaps_decreasing", monotone);
    rep.check_below(tag + "_final_gap", worst_final, 1e-3);
    rep.check_true(tag + "_order_T_rate", rate_ok);
  }
  return rep;
}

// Residuals of the variance fixed-point equations
// 1/tau_x = S^T tau_s + f_x''(xhat) and 1/tau_s = S tau_x + 1/f_z''(zhat).
inline double curvature_residual(const RunReport& report, const DenseMatrix& s,
                                 const std::vector<PenaltySpec>& priors,
                                 const std::vector<PenaltySpec>& likelihoods) {
  const std::size_t n = s.cols(), m = s.rows();
  const Vec tau_p = matvec(s, report.tau_x);
  Vec tau_s(m);
  for (std::size_t i = 0; i < m; ++i) tau_s[i] = (1.0 - report.tau_z[i] / tau_p[i]) / tau_p[i];
  const Vec st_ts = matvec_transposed(s, tau_s);
  double worst = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double rhs = st_ts[j] + priors[j].fpp(report.x_hat[j]);
    worst = std::max(worst, std::abs(1.0 / report.tau_x[j] - rhs) / (1.0 + std::abs(rhs)));
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double rhs = tau_p[i] + 1.0 / likelihoods[i].fpp(report.z_hat[i]);
    worst = std::max(worst, std::abs(1.0 / tau_s[i] - rhs) / (1.0 + std::abs(rhs)));
  }
  return worst;
}

inline SuiteReport curvature_fixed_point_audit(const RunReport& report, const DenseMatrix& a,
                                               const std::vector<PenaltySpec>& priors,
                                               const std::vector<PenaltySpec>& likelihoods,
                                               const RunReport* restarted = nullptr) {
  SuiteReport rep;
  rep.suite = "curvature_fixed_point";
  const DenseMatrix s = elementwise_square(a);
  rep.check_below("variance_equation_residual", curvature_residual(report, s, priors, likelihoods), 1e-8);
  if (restarted) {
    double dtau = 0.0;
    for (std::size_t j = 0; j < report.tau_x.size(); ++j)
      dtau = std::max(dtau, std::abs(report.tau_x[j] - restarted->tau_x[j]));
    rep.check_below("restart_uniqueness", dtau, 1e-6);
  }
  rep.check_below("stage2_mean_drift", report.stage2_drift, 1e-9);
  // perturbed variances must fail the residual check (negative control)
  RunReport bad = report;
  for (auto& t : bad.tau_x) t *= 1.02;
  rep.check_true("perturbed_tau_fails", curvature_residual(bad, s, priors, likelihoods) > 1e-8);
  return rep;
}

}  // namespace bfegamp
