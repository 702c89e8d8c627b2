#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bfegamp/bfe.hpp"
#include "bfegamp/estimators.hpp"
#include "bfegamp/linalg.hpp"

namespace bfegamp {

struct SolverConfig {
  int max_outer = 1000000;   // outer cycles; usually max_total_iters binds first
  int inner_per_outer = 10;  // ADMM steps per linearization update
  double theta = 1.0;        // damping of the inverse-variance linearization
  int cg_iters = 3;          // warm-started CG budget for the v-update
  double cg_tol = 1e-12;     // early-exit tolerance inside the CG budget
  double term_tol = 1e-4;    // relative-change stop on x; 0 disables
  int max_total_iters = 200;
  EstimatorMode mode = EstimatorMode::mmse;
  bool map_variance_rule = false;  // tau_s from tau_p instead of taubar_p
  double gap_tol = 0.0;            // > 0: stop once all residual gaps fall below
  bool record_bfe = false;         // record BFE at outer boundaries (smooth penalties)
  int bfe_nodes = 61;
  double divergence_guard = 1e8;
  double init_tau_r = 1.0;  // initial linearization variances
  double init_tau_p = 1.0;
};

struct FixedPointResiduals {
  double moment_gap = 0.0;    // consistency of z = A v and x = v
  double dual_gap = 0.0;      // ||q + A^T s|| / (1 + ||A^T s||)
  double variance_gap = 0.0;  // 1/tau vs 1/taubar, both sides
};

struct SolverState {
  Vec x, q, v, r;                    // length n
  Vec z, s, p;                       // length m
  Vec tau_x, tau_r, taubar_r;        // length n
  Vec tau_z, tau_p, taubar_p, tau_s; // length m
  long iteration = 0;
  long clamp_events = 0;
};

struct RunReport {
  Vec x_hat, z_hat, tau_x, tau_z;
  std::vector<double> nmse_trajectory;  // per inner step, dB, when truth known
  std::vector<double> bfe_trajectory;   // per outer boundary, when recorded
  FixedPointResiduals residuals;
  bool converged = false;
  bool diverged = false;
  long iterations_used = 0;
  long clamp_events = 0;
  double stage2_drift = 0.0;  // set by the MAP two-stage driver
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

inline FixedPointResiduals fixed_point_residuals(const SolverState& st, const DenseMatrix& a) {
  FixedPointResiduals res;
  const Vec av = matvec(a, st.v);
  double nz = 0.0, nx = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = st.z[i] - av[i];
    nz += d * d;
  }
  for (std::size_t j = 0; j < st.x.size(); ++j) {
    const double d = st.x[j] - st.v[j];
    nx += d * d;
  }
  res.moment_gap = std::max(std::sqrt(nz) / (1.0 + norm2(av)), std::sqrt(nx) / (1.0 + norm2(st.x)));
  const Vec ats = matvec_transposed(a, st.s);
  double nq = 0.0;
  for (std::size_t j = 0; j < st.q.size(); ++j) {
    const double d = st.q[j] + ats[j];
    nq += d * d;
  }
  res.dual_gap = std::sqrt(nq) / (1.0 + norm2(ats));
  double vg = 0.0;
  for (std::size_t j = 0; j < st.tau_r.size(); ++j) {
    const double ibar = 1.0 / st.taubar_r[j];
    vg = std::max(vg, std::abs(1.0 / st.tau_r[j] - ibar) / (1.0 + std::abs(ibar)));
  }
  for (std::size_t i = 0; i < st.tau_p.size(); ++i) {
    const double ibar = 1.0 / st.taubar_p[i];
    vg = std::max(vg, std::abs(1.0 / st.tau_p[i] - ibar) / (1.0 + std::abs(ibar)));
  }
  res.variance_gap = vg;
  return res;
}

// Double-loop minimizer of the LSL-BFE: ADMM inner steps on the linearized
// objective, entropy-gradient terms, and a damped inverse-variance
// linearization update. MAP mode swaps in prox estimators and optionally the
// modified tau_s rule.
class AdmmGampSolver {
 public:
  AdmmGampSolver(DenseMatrix a, ScalarEstimator gx, ScalarEstimator gz, SolverConfig config)
      : a_(std::move(a)),
        s_mat_(elementwise_square(a_)),
        gx_(std::move(gx)),
        gz_(std::move(gz)),
        config_(config) {
    if (gx_.size() != a_.cols() || gz_.size() != a_.rows())
      throw std::invalid_argument("AdmmGampSolver: estimator sizes must match A");
    reset();
  }

  // tau_r = tau_p = 1, v = prior mean, q = s = 0.
  void reset() {
    const std::size_t n = a_.cols(), m = a_.rows();
    st_ = SolverState{};
    st_.x.assign(n, 0.0);
    st_.q.assign(n, 0.0);
    st_.r.assign(n, 0.0);
    st_.z.assign(m, 0.0);
    st_.s.assign(m, 0.0);
    st_.p.assign(m, 0.0);
    st_.tau_r.assign(n, config_.init_tau_r);
    st_.taubar_r.assign(n, config_.init_tau_r);
    st_.tau_x.assign(n, config_.init_tau_r);
    st_.tau_p.assign(m, config_.init_tau_p);
    st_.taubar_p.assign(m, config_.init_tau_p);
    st_.tau_z.assign(m, config_.init_tau_p);
    st_.tau_s.assign(m, 0.0);
    st_.v.resize(n);
    double prior_energy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const auto pm = prior_moments(gx_.spec(j));
      st_.v[j] = pm.mean;
      prior_energy += pm.variance + pm.mean * pm.mean;
    }
    init_scale_ = std::max(1.0, std::sqrt(prior_energy));
  }

  // One ADMM iteration: belief refresh at (r, p), dual ascent, v-update by
  // warm-started CG on (A^T D_p A + D_r) v = A^T D_p (z + tau_p.s) + D_r (x + tau_r.q).
  void inner_admm_step() {
    const std::size_t n = a_.cols(), m = a_.rows();
    const Vec av = matvec(a_, st_.v);
    for (std::size_t j = 0; j < n; ++j) st_.r[j] = st_.v[j] - st_.tau_r[j] * st_.q[j];
    for (std::size_t i = 0; i < m; ++i) st_.p[i] = av[i] - st_.tau_p[i] * st_.s[i];
    for (std::size_t j = 0; j < n; ++j) {
      const auto e = gx_.eval(j, st_.r[j], st_.tau_r[j]);
      st_.x[j] = e.mean;
      st_.tau_x[j] = e.variance;
    }
    for (std::size_t i = 0; i < m; ++i) {
      const auto e = gz_.eval(i, st_.p[i], st_.tau_p[i]);
      st_.z[i] = e.mean;
      st_.tau_z[i] = e.variance;
    }
    for (std::size_t j = 0; j < n; ++j) st_.q[j] += (st_.x[j] - st_.v[j]) / st_.tau_r[j];
    for (std::size_t i = 0; i < m; ++i) st_.s[i] += (st_.z[i] - av[i]) / st_.tau_p[i];

    Vec bz(m), bx(n);
    for (std::size_t i = 0; i < m; ++i) bz[i] = (st_.z[i] + st_.tau_p[i] * st_.s[i]) / st_.tau_p[i];
    Vec rhs = matvec_transposed(a_, bz);
    for (std::size_t j = 0; j < n; ++j) rhs[j] += (st_.x[j] + st_.tau_r[j] * st_.q[j]) / st_.tau_r[j];
    const auto normal_op = [&](const Vec& w) {
      Vec aw = matvec(a_, w);
      for (std::size_t i = 0; i < m; ++i) aw[i] /= st_.tau_p[i];
      Vec out = matvec_transposed(a_, aw);
      for (std::size_t j = 0; j < n; ++j) out[j] += w[j] / st_.tau_r[j];
      return out;
    };
    st_.v = cg_solve(normal_op, rhs, st_.v, config_.cg_iters, config_.cg_tol);
    ++st_.iteration;
    if (!all_finite(st_.x) || !all_finite(st_.z) || !all_finite(st_.v))
      throw std::runtime_error("inner_admm_step: non-finite state");
  }

  // taubar_p = S tau_x; tau_s from taubar_p (MMSE) or tau_p (MAP rule);
  // taubar_r = 1 ./ (S^T tau_s) with the tau_s floor counted.
  void gradient_update() {
    const std::size_t n = a_.cols(), m = a_.rows();
    st_.taubar_p = matvec(s_mat_, st_.tau_x);
    const bool map_rule = (config_.mode == EstimatorMode::map) && config_.map_variance_rule;
    for (std::size_t i = 0; i < m; ++i) {
      if (!(st_.taubar_p[i] > 0.0)) throw std::runtime_error("gradient_update: (S tau_x) non-positive");
      const double denom = map_rule ? st_.tau_p[i] : st_.taubar_p[i];
      double ts = (1.0 - st_.tau_z[i] / denom) / denom;
      if (ts < kTauSFloor) {
        ts = kTauSFloor;
        ++st_.clamp_events;
      }
      st_.tau_s[i] = ts;
    }
    const Vec st_ts = matvec_transposed(s_mat_, st_.tau_s);
    for (std::size_t j = 0; j < n; ++j) {
      if (!(st_ts[j] > 0.0) || !std::isfinite(st_ts[j]))
        throw std::runtime_error("gradient_update: degenerate curvature after clamping");
      st_.taubar_r[j] = 1.0 / st_ts[j];
    }
  }

  // 1/tau <- theta/taubar + (1-theta)/tau, componentwise on both sides.
  void linearization_update(double theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("linearization_update: theta in [0,1]");
    for (std::size_t j = 0; j < st_.tau_r.size(); ++j)
      st_.tau_r[j] = 1.0 / (theta / st_.taubar_r[j] + (1.0 - theta) / st_.tau_r[j]);
    for (std::size_t i = 0; i < st_.tau_p.size(); ++i)
      st_.tau_p[i] = 1.0 / (theta / st_.taubar_p[i] + (1.0 - theta) / st_.tau_p[i]);
  }

  FixedPointResiduals residuals() const { return fixed_point_residuals(st_, a_); }

  // BFE of the current beliefs (r, tau_r, p, tau_p); smooth penalties only.
  double bfe() const {
    BeliefParams b{st_.r, st_.tau_r, st_.p, st_.tau_p};
    return bfe_value(b, gx_.specs(), gz_.specs(), s_mat_, config_.bfe_nodes);
  }

  // Double-loop driver: inner_per_outer ADMM steps with the linearization
  // frozen, then one gradient + damped linearization update, until the
  // relative-change rule (or gap_tol when set) fires or the budget runs out.
  RunReport solve(const Vec* x_true = nullptr, std::uint64_t seed = 0) {
    const auto t0 = std::chrono::steady_clock::now();
    reset();
    RunReport rep;
    rep.seed = seed;
    Vec x_prev;
    bool have_prev = false;
    bool done = false;
    try {
      while (!done && st_.iteration < config_.max_total_iters) {
        for (int k = 0; k < config_.inner_per_outer; ++k) {
          inner_admm_step();
          if (x_true) rep.nmse_trajectory.push_back(nmse_db_of(*x_true, st_.x));
          if (norm2(st_.x) > config_.divergence_guard * init_scale_) {
            rep.diverged = true;
            done = true;
            break;
          }
          if (config_.term_tol > 0.0 && have_prev) {
            const double base = norm2(x_prev);
            double change = 0.0;
            for (std::size_t j = 0; j < st_.x.size(); ++j) {
              const double d = st_.x[j] - x_prev[j];
              change += d * d;
            }
            change = std::sqrt(change);
            if ((base > 0.0 ? change / base : change) <= config_.term_tol) {
              rep.converged = true;
              done = true;
            }
          }
          x_prev = st_.x;
          have_prev = true;
          if (done || st_.iteration >= config_.max_total_iters) break;
        }
        gradient_update();
        if (config_.record_bfe) rep.bfe_trajectory.push_back(bfe());
        if (!done && config_.gap_tol > 0.0) {
          const auto res = residuals();
          if (res.moment_gap < config_.gap_tol && res.dual_gap < config_.gap_tol &&
              res.variance_gap < config_.gap_tol) {
            rep.converged = true;
            done = true;
          }
        }
        if (done || st_.iteration >= config_.max_total_iters) break;
        linearization_update(config_.theta);
      }
    } catch (const std::runtime_error&) {
      rep.diverged = true;  // numeric abort: return the partial report
    }
    rep.x_hat = st_.x;
    rep.z_hat = st_.z;
    rep.tau_x = st_.tau_x;
    rep.tau_z = st_.tau_z;
    rep.iterations_used = st_.iteration;
    rep.clamp_events = st_.clamp_events;
    rep.residuals = residuals();
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
  }

  const SolverState& state() const { return st_; }
  SolverState& mutable_state() { return st_; }
  const DenseMatrix& a() const { return a_; }
  const DenseMatrix& s_matrix() const { return s_mat_; }
  const ScalarEstimator& gx() const { return gx_; }
  const ScalarEstimator& gz() const { return gz_; }
  const SolverConfig& config() const { return config_; }
  SolverConfig& mutable_config() { return config_; }

 private:
  static double nmse_db_of(const Vec& truth, const Vec& est) {
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < truth.size(); ++j) {
      const double d = truth[j] - est[j];
      num += d * d;
      den += truth[j] * truth[j];
    }
    if (den == 0.0) return 0.0;
    return std::max(10.0 * std::log10(num / den), -150.0);
  }

  DenseMatrix a_, s_mat_;
  ScalarEstimator gx_, gz_;
  SolverConfig config_;
  SolverState st_;
  double init_scale_ = 1.0;
};

// Theorem-6 two-stage MAP driver: stage 1 freezes the linearization and runs
// the prox-ADMM inner loop to a tight fixed point; stage 2 turns on theta = 1
// with the modified tau_s rule and iterates the variance maps until tau_x
// settles, asserting the mean variables stay put.
inline RunReport map_two_stage_solve(const DenseMatrix& a, const std::vector<PenaltySpec>& priors,
                                     const std::vector<PenaltySpec>& likelihoods, SolverConfig config,
                                     double stage1_gap = 1e-12, int stage1_max_iters = 50000,
                                     double stage2_tau_tol = 1e-10, int stage2_max_iters = 5000,
                                     double drift_tol = 1e-9) {
  const auto t0 = std::chrono::steady_clock::now();
  config.mode = EstimatorMode::map;
  config.map_variance_rule = true;
  ScalarEstimator gx(EstimatorMode::map, priors);
  ScalarEstimator gz(EstimatorMode::map, likelihoods);
  AdmmGampSolver solver(a, gx, gz, config);

  // stage 1: theta = 0, run inner ADMM until moment and dual gaps vanish
  FixedPointResiduals res;
  for (int it = 0; it < stage1_max_iters; ++it) {
    solver.inner_admm_step();
    if (it % 10 == 9) {
      res = solver.residuals();
      if (res.moment_gap < stage1_gap && res.dual_gap < stage1_gap) break;
    }
  }
  res = solver.residuals();
  if (!(res.moment_gap < 1e-8 && res.dual_gap < 1e-8))
    throw std::runtime_error("map_two_stage_solve: stage 1 did not reach a fixed point");

  const Vec x0 = solver.state().x, z0 = solver.state().z, q0 = solver.state().q,
            s0 = solver.state().s, v0 = solver.state().v;

  // stage 2: theta = 1 with the modified tau_s update
  double drift = 0.0;
  Vec tau_x_prev = solver.state().tau_x;
  bool settled = false;
  for (int it = 0; it < stage2_max_iters; ++it) {
    solver.gradient_update();
    solver.linearization_update(1.0);
    solver.inner_admm_step();
    const auto& st = solver.state();
    double d = 0.0;
    for (std::size_t j = 0; j < x0.size(); ++j)
      d = std::max({d, std::abs(st.x[j] - x0[j]), std::abs(st.q[j] - q0[j]), std::abs(st.v[j] - v0[j])});
    for (std::size_t i = 0; i < z0.size(); ++i)
      d = std::max({d, std::abs(st.z[i] - z0[i]), std::abs(st.s[i] - s0[i])});
    drift = std::max(drift, d);
    double dtau = 0.0;
    for (std::size_t j = 0; j < tau_x_prev.size(); ++j)
      dtau = std::max(dtau, std::abs(st.tau_x[j] - tau_x_prev[j]));
    tau_x_prev = st.tau_x;
    if (dtau < stage2_tau_tol) {
      settled = true;
      break;
    }
  }
  if (!settled) throw std::runtime_error("map_two_stage_solve: stage 2 variance iteration did not settle");
  if (drift > drift_tol)
    throw std::runtime_error("map_two_stage_solve: stage-2 mean-variable drift exceeded tolerance");

  solver.gradient_update();
  RunReport rep;
  rep.x_hat = solver.state().x;
  rep.z_hat = solver.state().z;
  rep.tau_x = solver.state().tau_x;
  rep.tau_z = solver.state().tau_z;
  rep.converged = true;
  rep.iterations_used = solver.state().iteration;
  rep.clamp_events = solver.state().clamp_events;
  rep.residuals = solver.residuals();
  rep.stage2_drift = drift;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace bfegamp
