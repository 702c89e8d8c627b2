#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bfegamp/estimators.hpp"
#include "bfegamp/linalg.hpp"
#include "bfegamp/penalty.hpp"
#include "bfegamp/rng.hpp"

namespace bfegamp {

// One GLM instance: y observed through the componentwise likelihood of
// z = A x under the componentwise prior. Truth is carried for synthetic data.
struct GlmProblem {
  DenseMatrix a;
  Vec y;
  std::vector<PenaltySpec> prior;       // length n
  std::vector<PenaltySpec> likelihood;  // length m
  bool has_truth = false;
  Vec x_true;
  std::vector<std::size_t> support;
};

// RNG stream ids per draw kind; streams 0/1 belong to build_spectral_matrix.
inline constexpr std::uint64_t kSignalStream = 2;
inline constexpr std::uint64_t kNoiseStream = 3;
inline constexpr std::uint64_t kIidMatrixStream = 4;

struct BgSignal {
  Vec x;
  std::vector<std::size_t> support;
};

// x_j = 0 with probability 1-rho, else N(0, sx); the Gaussian is only drawn
// for active components.
inline BgSignal gen_bg_signal(std::size_t n, double rho, double sx, std::uint64_t seed) {
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("gen_bg_signal: rho in (0,1]");
  Rng rng(seed, kSignalStream);
  BgSignal out;
  out.x.assign(n, 0.0);
  const double sd = std::sqrt(sx);
  for (std::size_t j = 0; j < n; ++j) {
    if (rng.uniform() < rho) {
      out.x[j] = sd * rng.gaussian();
      out.support.push_back(j);
    }
  }
  return out;
}

struct AwgnObservation {
  Vec y;
  double sigma2 = 0.0;
};

// sigma2 = ||Ax||^2 / (m 10^(snr/10)); y = Ax + N(0, sigma2 I).
inline AwgnObservation gen_awgn_problem(const Vec& x, const DenseMatrix& a, double snr_db,
                                        std::uint64_t seed) {
  const Vec ax = matvec(a, x);
  const double energy = dot(ax, ax);
  if (energy == 0.0) throw std::invalid_argument("gen_awgn_problem: Ax is zero");
  AwgnObservation out;
  out.sigma2 = energy / (static_cast<double>(a.rows()) * std::pow(10.0, snr_db / 10.0));
  out.y = ax;
  Rng rng(seed, kNoiseStream);
  const double sd = std::sqrt(out.sigma2);
  for (auto& yi : out.y) yi += sd * rng.gaussian();
  return out;
}

// y_i = sign((Ax)_i) with the tie at exactly zero mapped to +1.
inline Vec gen_onebit_problem(const Vec& x, const DenseMatrix& a) {
  Vec y = matvec(a, x);
  for (auto& v : y) v = (v >= 0.0) ? 1.0 : -1.0;
  return y;
}

// Support-aware linear-MMSE bound for the AWGN channel:
// xhat_S = sx A_S^T (sx A_S A_S^T + sigma2 I)^{-1} y, zero off-support.
inline Vec genie_mmse(const DenseMatrix& a, const Vec& y, const std::vector<std::size_t>& support,
                      double sx, double sigma2) {
  const std::size_t m = a.rows(), n = a.cols();
  Vec xhat(n, 0.0);
  if (support.empty()) return xhat;
  DenseMatrix gram(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = i; k < m; ++k) {
      double s = 0.0;
      for (std::size_t j : support) s += a(i, j) * a(k, j);
      gram(i, k) = sx * s + (i == k ? sigma2 : 0.0);
      gram(k, i) = gram(i, k);
    }
  const Vec w = cholesky_solve(gram, y);
  for (std::size_t j : support) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += a(i, j) * w[i];
    xhat[j] = sx * s;
  }
  return xhat;
}

// 10 log10(||x - xhat||^2 / ||x||^2), floored at -150 dB. One-bit runs
// compare unit-normalized vectors because sign measurements lose scale.
inline double nmse_db(const Vec& x_true, const Vec& x_hat, bool normalize = false) {
  const double nt = norm2(x_true);
  if (nt == 0.0) throw std::invalid_argument("nmse_db: zero truth");
  double num = 0.0, den = 0.0;
  if (normalize) {
    const double nh = norm2(x_hat);
    for (std::size_t j = 0; j < x_true.size(); ++j) {
      const double t = x_true[j] / nt;
      const double h = (nh > 0.0) ? x_hat[j] / nh : 0.0;
      num += (t - h) * (t - h);
      den += t * t;
    }
  } else {
    for (std::size_t j = 0; j < x_true.size(); ++j) {
      num += (x_true[j] - x_hat[j]) * (x_true[j] - x_hat[j]);
      den += x_true[j] * x_true[j];
    }
  }
  return std::max(10.0 * std::log10(num / den), -150.0);
}

inline ScalarEstimator make_prior_estimator(const GlmProblem& prob, EstimatorMode mode,
                                            int quad_nodes = 31) {
  return ScalarEstimator(mode, prob.prior, quad_nodes);
}

inline ScalarEstimator make_output_estimator(const GlmProblem& prob, EstimatorMode mode,
                                             int quad_nodes = 31) {
  return ScalarEstimator(mode, prob.likelihood, quad_nodes);
}

// i.i.d. N(0, 1/m) measurement matrix from the seed's matrix stream.
inline DenseMatrix iid_gaussian_matrix(std::size_t m, std::size_t n, std::uint64_t seed) {
  Rng rng(seed, kIidMatrixStream);
  DenseMatrix a(m, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = scale * rng.gaussian();
  return a;
}

}  // namespace bfegamp
