#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "bfegamp/estimators.hpp"
#include "bfegamp/linalg.hpp"
#include "bfegamp/penalty.hpp"

namespace bfegamp {

// Gaussian-tilted belief pair: b_x ~ exp(-f_x(x) - (x-r)^2/(2 tau_r)) and
// b_z ~ exp(-f_z(z) - (z-p)^2/(2 tau_p)), componentwise.
struct BeliefParams {
  Vec r, tau_r;  // length n
  Vec p, tau_p;  // length m
};

struct VarianceState {
  Vec tau_x, tau_z;
  Vec taubar_p;  // S tau_x
  Vec tau_s;     // (1 - tau_z ./ taubar_p) ./ taubar_p, floored
  Vec taubar_r;  // 1 ./ (S^T tau_s)
  int clamp_events = 0;
};

inline constexpr double kTauSFloor = 1e-12;

// H = 1/2 sum_i [ tau_z_i / (S tau_x)_i + ln(2 pi (S tau_x)_i) ].
inline double entropy_term(const Vec& tau_x, const Vec& tau_z, const DenseMatrix& s) {
  if (s.cols() != tau_x.size() || s.rows() != tau_z.size())
    throw std::invalid_argument("entropy_term: dimension mismatch");
  const Vec stx = matvec(s, tau_x);
  double h = 0.0;
  for (std::size_t i = 0; i < stx.size(); ++i) {
    if (!(stx[i] > 0.0)) throw std::runtime_error("entropy_term: (S tau_x) has a non-positive entry");
    h += 0.5 * (tau_z[i] / stx[i] + std::log(2.0 * 3.14159265358979323846 * stx[i]));
  }
  return h;
}

// The partial derivatives of the entropy term packaged as inverse-variance
// weights: 1/(2 taubar_p) = dH/dtau_z and 1/(2 taubar_r) = dH/dtau_x.
// tau_s entries are floored at 1e-12 before the taubar_r division.
inline VarianceState gradient_terms(const Vec& tau_x, const Vec& tau_z, const DenseMatrix& s) {
  if (s.cols() != tau_x.size() || s.rows() != tau_z.size())
    throw std::invalid_argument("gradient_terms: dimension mismatch");
  VarianceState out;
  out.tau_x = tau_x;
  out.tau_z = tau_z;
  out.taubar_p = matvec(s, tau_x);
  out.tau_s.resize(tau_z.size());
  for (std::size_t i = 0; i < tau_z.size(); ++i) {
    if (!(out.taubar_p[i] > 0.0)) throw std::runtime_error("gradient_terms: (S tau_x) has a non-positive entry");
    double ts = (1.0 - tau_z[i] / out.taubar_p[i]) / out.taubar_p[i];
    if (ts < kTauSFloor) {
      ts = kTauSFloor;
      ++out.clamp_events;
    }
    out.tau_s[i] = ts;
  }
  const Vec st_ts = matvec_transposed(s, out.tau_s);
  out.taubar_r.resize(tau_x.size());
  for (std::size_t j = 0; j < tau_x.size(); ++j) {
    if (!(st_ts[j] > 0.0) || !std::isfinite(st_ts[j]))
      throw std::runtime_error("gradient_terms: degenerate curvature after clamping");
    out.taubar_r[j] = 1.0 / st_ts[j];
  }
  return out;
}

namespace detail {

// D(b || e^{-f}) for the tilted belief b ~ exp(-f - (x-r)^2/(2 tau)):
// ln b + f collapses to -(x-r)^2/(2 tau) - ln Z_b.
inline double tilted_kl(const PenaltySpec& spec, double r, double tau, int nodes, double* var_out) {
  const auto mom = tilted_moments_smooth(spec, r, tau, nodes);
  if (var_out) *var_out = mom.variance;
  const double dr = mom.mean - r;
  return -(mom.variance + dr * dr) / (2.0 * tau) - mom.log_z;
}

inline void check_beliefs(const BeliefParams& b, const std::vector<PenaltySpec>& priors,
                          const std::vector<PenaltySpec>& likelihoods, const DenseMatrix& s) {
  if (b.r.size() != s.cols() || b.tau_r.size() != s.cols() || b.p.size() != s.rows() ||
      b.tau_p.size() != s.rows() || priors.size() != s.cols() || likelihoods.size() != s.rows())
    throw std::invalid_argument("bfe: dimension mismatch");
  for (double t : b.tau_r)
    if (!(t > 0.0)) throw std::invalid_argument("bfe: tau_r must be positive");
  for (double t : b.tau_p)
    if (!(t > 0.0)) throw std::invalid_argument("bfe: tau_p must be positive");
  for (const auto& f : priors)
    if (!f.smooth()) throw std::invalid_argument("bfe: smooth penalty families only");
  for (const auto& f : likelihoods)
    if (!f.smooth()) throw std::invalid_argument("bfe: smooth penalty families only");
}

}  // namespace detail

// LSL-BFE J = sum_j D(b_xj || e^{-f_xj}) + sum_i D(b_zi || e^{-f_zi})
//           + H(tau_x, tau_z), up to the additive constant ln Z_z which is
// dropped; only differences of this value are meaningful.
inline double bfe_value(const BeliefParams& beliefs, const std::vector<PenaltySpec>& priors,
                        const std::vector<PenaltySpec>& likelihoods, const DenseMatrix& s,
                        int nodes = 61) {
  detail::check_beliefs(beliefs, priors, likelihoods, s);
  Vec tau_x(priors.size()), tau_z(likelihoods.size());
  double j = 0.0;
  for (std::size_t k = 0; k < priors.size(); ++k)
    j += detail::tilted_kl(priors[k], beliefs.r[k], beliefs.tau_r[k], nodes, &tau_x[k]);
  for (std::size_t k = 0; k < likelihoods.size(); ++k)
    j += detail::tilted_kl(likelihoods[k], beliefs.p[k], beliefs.tau_p[k], nodes, &tau_z[k]);
  return j + entropy_term(tau_x, tau_z, s);
}

// Linearized LSL-BFE: the entropy term replaced by fixed inverse-variance
// weights 1/(2 tau_r_lin), 1/(2 tau_p_lin); same dropped constant.
inline double linearized_bfe_value(const BeliefParams& beliefs, const Vec& tau_r_lin,
                                   const Vec& tau_p_lin, const std::vector<PenaltySpec>& priors,
                                   const std::vector<PenaltySpec>& likelihoods, const DenseMatrix& s,
                                   int nodes = 61) {
  detail::check_beliefs(beliefs, priors, likelihoods, s);
  if (tau_r_lin.size() != priors.size() || tau_p_lin.size() != likelihoods.size())
    throw std::invalid_argument("linearized_bfe_value: dimension mismatch");
  double j = 0.0;
  for (std::size_t k = 0; k < priors.size(); ++k) {
    double var = 0.0;
    j += detail::tilted_kl(priors[k], beliefs.r[k], beliefs.tau_r[k], nodes, &var);
    j += var / (2.0 * tau_r_lin[k]);
  }
  for (std::size_t k = 0; k < likelihoods.size(); ++k) {
    double var = 0.0;
    j += detail::tilted_kl(likelihoods[k], beliefs.p[k], beliefs.tau_p[k], nodes, &var);
    j += var / (2.0 * tau_p_lin[k]);
  }
  return j;
}

// Curvature objective J2(tau_x, tau_z) whose minimizer carries the inverse
// local curvatures of the constrained MAP objective; tau_p = S tau_x.
inline double curvature_objective(const Vec& tau_x, const Vec& tau_z, const Vec& x_hat,
                                  const Vec& z_hat, const DenseMatrix& s,
                                  const std::vector<PenaltySpec>& priors,
                                  const std::vector<PenaltySpec>& likelihoods) {
  if (tau_x.size() != s.cols() || tau_z.size() != s.rows() || x_hat.size() != s.cols() ||
      z_hat.size() != s.rows() || priors.size() != s.cols() || likelihoods.size() != s.rows())
    throw std::invalid_argument("curvature_objective: dimension mismatch");
  for (double t : tau_x)
    if (!(t > 0.0)) throw std::invalid_argument("curvature_objective: tau_x must be positive");
  for (double t : tau_z)
    if (!(t > 0.0)) throw std::invalid_argument("curvature_objective: tau_z must be positive");
  const Vec tau_p = matvec(s, tau_x);
  double j2 = 0.0;
  for (std::size_t j = 0; j < tau_x.size(); ++j)
    j2 += tau_x[j] * priors[j].fpp(x_hat[j]) - std::log(tau_x[j]);
  for (std::size_t i = 0; i < tau_z.size(); ++i) {
    if (!(tau_p[i] > 0.0)) throw std::runtime_error("curvature_objective: (S tau_x) has a non-positive entry");
    j2 += tau_z[i] * (likelihoods[i].fpp(z_hat[i]) + 1.0 / tau_p[i]) + std::log(tau_p[i] / tau_z[i]);
  }
  return j2;
}

}  // namespace bfegamp
