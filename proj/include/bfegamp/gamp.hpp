#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bfegamp/estimators.hpp"
#include "bfegamp/linalg.hpp"
#include "bfegamp/solver.hpp"

namespace bfegamp {

struct GampState {
  Vec x, tau_x, r, tau_r;       // length n
  Vec s, p, tau_p, z, tau_z, tau_s;  // length m
  bool diverged = false;
  long iteration = 0;
};

inline GampState gamp_init(const DenseMatrix& a, const ScalarEstimator& gx) {
  GampState st;
  const std::size_t n = a.cols(), m = a.rows();
  st.x.resize(n);
  st.tau_x.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto pm = prior_moments(gx.spec(j));
    st.x[j] = pm.mean;
    st.tau_x[j] = pm.variance;
  }
  st.r.assign(n, 0.0);
  st.tau_r.assign(n, 0.0);
  st.s.assign(m, 0.0);  // s^{-1} = 0
  st.p.assign(m, 0.0);
  st.tau_p.assign(m, 0.0);
  st.z.assign(m, 0.0);
  st.tau_z.assign(m, 0.0);
  st.tau_s.assign(m, 0.0);
  return st;
}

// One sum-product iteration with interleaved mean/variance updates, executed
// in exact order and without clamping; a non-positive or non-finite variance
// marks the state diverged instead of raising.
inline void gamp_step(GampState& st, const ScalarEstimator& gx, const ScalarEstimator& gz,
                      const DenseMatrix& a, const DenseMatrix& s_mat) {
  if (st.diverged) return;
  const std::size_t n = a.cols(), m = a.rows();
  st.tau_p = matvec(s_mat, st.tau_x);
  const Vec ax = matvec(a, st.x);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(st.tau_p[i] > 0.0) || !std::isfinite(st.tau_p[i])) {
      st.diverged = true;
      return;
    }
    st.p[i] = ax[i] - st.tau_p[i] * st.s[i];
  }
  for (std::size_t i = 0; i < m; ++i) {
    const auto e = gz.eval(i, st.p[i], st.tau_p[i]);
    st.tau_z[i] = e.variance;
    st.z[i] = e.mean;
  }
  for (std::size_t i = 0; i < m; ++i) {
    st.tau_s[i] = (1.0 - st.tau_z[i] / st.tau_p[i]) / st.tau_p[i];
    st.s[i] = (st.z[i] - st.p[i]) / st.tau_p[i];
  }
  const Vec st_ts = matvec_transposed(s_mat, st.tau_s);
  const Vec ats = matvec_transposed(a, st.s);
  for (std::size_t j = 0; j < n; ++j) {
    st.tau_r[j] = 1.0 / st_ts[j];
    if (!(st.tau_r[j] > 0.0) || !std::isfinite(st.tau_r[j])) {
      st.diverged = true;
      return;
    }
    st.r[j] = st.x[j] + st.tau_r[j] * ats[j];
  }
  for (std::size_t j = 0; j < n; ++j) {
    const auto e = gx.eval(j, st.r[j], st.tau_r[j]);
    st.tau_x[j] = e.variance;
    st.x[j] = e.mean;
  }
  ++st.iteration;
  if (!all_finite(st.x) || !all_finite(st.tau_x)) st.diverged = true;
}

// Original sum-product baseline with the same termination rule as the ADMM
// solver; divergence is a reported outcome, never an error.
inline RunReport gamp_solve(const DenseMatrix& a, const ScalarEstimator& gx,
                            const ScalarEstimator& gz, const SolverConfig& config,
                            const Vec* x_true = nullptr, std::uint64_t seed = 0) {
  const auto t0 = std::chrono::steady_clock::now();
  const DenseMatrix s_mat = elementwise_square(a);
  GampState st = gamp_init(a, gx);
  double init_scale = std::max(1.0, norm2(st.x));
  {
    double e = 0.0;
    for (std::size_t j = 0; j < st.tau_x.size(); ++j) e += st.tau_x[j] + st.x[j] * st.x[j];
    init_scale = std::max(1.0, std::sqrt(e));
  }
  RunReport rep;
  rep.seed = seed;
  Vec x_prev = st.x;
  while (st.iteration < config.max_total_iters) {
    gamp_step(st, gx, gz, a, s_mat);
    if (st.diverged) break;
    if (x_true) {
      double num = 0.0, den = 0.0;
      for (std::size_t j = 0; j < x_true->size(); ++j) {
        const double d = (*x_true)[j] - st.x[j];
        num += d * d;
        den += (*x_true)[j] * (*x_true)[j];
      }
      rep.nmse_trajectory.push_back(den > 0.0 ? std::max(10.0 * std::log10(num / den), -150.0) : 0.0);
    }
    if (norm2(st.x) > config.divergence_guard * init_scale) {
      st.diverged = true;
      break;
    }
    if (config.term_tol > 0.0) {
      const double base = norm2(x_prev);
      double change = 0.0;
      for (std::size_t j = 0; j < st.x.size(); ++j) {
        const double d = st.x[j] - x_prev[j];
        change += d * d;
      }
      change = std::sqrt(change);
      if (st.iteration > 1 && (base > 0.0 ? change / base : change) <= config.term_tol) {
        rep.converged = true;
        break;
      }
    }
    x_prev = st.x;
  }
  rep.diverged = st.diverged;
  rep.x_hat = st.x;
  rep.z_hat = st.z;
  rep.tau_x = st.tau_x;
  rep.tau_z = st.tau_z;
  rep.iterations_used = st.iteration;
  // moment consistency of the final iterate; the dual/variance identities
  // hold by construction in GAMP, so only the first gap is informative
  if (!st.diverged && all_finite(st.x)) {
    const Vec ax = matvec(a, st.x);
    double nz = 0.0;
    for (std::size_t i = 0; i < ax.size(); ++i) {
      const double d = st.z[i] - ax[i];
      nz += d * d;
    }
    rep.residuals.moment_gap = std::sqrt(nz) / (1.0 + norm2(ax));
  } else {
    rep.residuals.moment_gap = std::numeric_limits<double>::infinity();
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace bfegamp
