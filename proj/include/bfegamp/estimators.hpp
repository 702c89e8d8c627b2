#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bfegamp/penalty.hpp"
#include "bfegamp/quadrature.hpp"

namespace bfegamp {

// Posterior mean and variance of one scalar component. In MMSE mode the
// variance is tau * g'(r, tau); in MAP mode it is the inverse curvature
// tau / (1 + tau f''(xhat)).
struct EstimatorOutput {
  double mean = 0.0;
  double variance = 0.0;
};

enum class EstimatorMode { mmse, map };

inline constexpr double kVarianceFloor = 1e-14;

namespace detail {

// Scaled complementary error function erfcx(x) = e^{x^2} erfc(x).
inline double erfcx(double x) {
  if (x < 0.0) {
    if (x < -26.5) return std::numeric_limits<double>::infinity();
    return 2.0 * std::exp(x * x) - erfcx(-x);
  }
  if (x <= 25.0) return std::exp(x * x) * std::erfc(x);
  const double ix2 = 1.0 / (x * x);
  return (1.0 - 0.5 * ix2 * (1.0 - 1.5 * ix2 * (1.0 - 2.5 * ix2))) /
         (x * 1.77245385090551602730);  // sqrt(pi)
}

// Root of f'(x) + (x - r)/tau: Newton with a bisection safeguard on a
// bracket grown geometrically from [r - 10 tau |f'(r)| - 1, r + ...].
inline double prox_root(const PenaltySpec& spec, double r, double tau, double tol) {
  const auto psi = [&](double x) { return spec.fp(x) + (x - r) / tau; };
  double w = 10.0 * tau * std::abs(spec.fp(r)) + 1.0;
  double lo = r - w, hi = r + w;
  for (int g = 0; psi(lo) > 0.0; ++g) {
    if (g > 200) throw std::runtime_error("prox_root: bracket growth failed");
    w *= 2.0;
    lo = r - w;
  }
  w = 10.0 * tau * std::abs(spec.fp(r)) + 1.0;
  for (int g = 0; psi(hi) < 0.0; ++g) {
    if (g > 200) throw std::runtime_error("prox_root: bracket growth failed");
    w *= 2.0;
    hi = r + w;
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    const double g = psi(x);
    if (std::abs(g) <= tol) return x;
    if (g > 0.0)
      hi = x;
    else
      lo = x;
    const double step = g / (spec.fpp(x) + 1.0 / tau);
    double xn = x - step;
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
    if (xn == x) return x;  // bracket exhausted at machine precision
    x = xn;
  }
  if (std::abs(psi(x)) <= tol) return x;
  throw std::runtime_error("prox_root: Newton did not converge in 100 iterations");
}

struct TiltedMoments {
  double mean = 0.0;
  double variance = 0.0;
  double log_z = 0.0;  // ln of integral exp(-f(x) - (x-r)^2/(2 tau)) dx
};

// Moments of b(x) ~ exp(-f(x) - (x-r)^2/(2 tau)) for smooth penalties:
// mode-centered composite Gauss-Legendre, panels no wider than the
// analyticity scale of e^{-f} and aligned to x = 0 where ln cosh kinks.
inline TiltedMoments tilted_moments_smooth(const PenaltySpec& spec, double r, double tau, int nodes) {
  const double x0 = prox_root(spec, r, tau, 1e-13 * (1.0 + std::abs(r) / tau));
  const auto phi = [&](double x) { return spec.f(x) + (x - r) * (x - r) / (2.0 * tau); };
  const double phi0 = phi(x0);
  const double sigma = 1.0 / std::sqrt(spec.curvature_lower() + 1.0 / tau);
  const double span = 12.0 * sigma;
  const double h = std::min(sigma, 0.75 * spec.analyticity_scale());
  const double lo = x0 - span, hi = x0 + span;
  int panels = static_cast<int>(std::ceil((hi - lo) / h));
  panels = std::min(std::max(panels, 2), 200);

  std::vector<double> bounds;
  bounds.reserve(panels + 2);
  for (int i = 0; i <= panels; ++i)
    bounds.push_back(lo + (hi - lo) * static_cast<double>(i) / panels);
  if (lo < 0.0 && hi > 0.0) {
    bounds.push_back(0.0);
    std::sort(bounds.begin(), bounds.end());
  }

  const QuadratureRule& gl = gauss_legendre(nodes);
  std::vector<double> xs, ws;
  xs.reserve(bounds.size() * nodes);
  ws.reserve(bounds.size() * nodes);
  for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
    const double mid = 0.5 * (bounds[b] + bounds[b + 1]);
    const double half = 0.5 * (bounds[b + 1] - bounds[b]);
    if (half <= 0.0) continue;
    for (int k = 0; k < nodes; ++k) {
      const double x = mid + half * gl.nodes[k];
      xs.push_back(x);
      ws.push_back(gl.weights[k] * half * std::exp(-(phi(x) - phi0)));
    }
  }
  double z = 0.0, m1 = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    z += ws[k];
    m1 += ws[k] * xs[k];
  }
  TiltedMoments out;
  out.mean = m1 / z;
  double m2 = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double d = xs[k] - out.mean;
    m2 += ws[k] * d * d;
  }
  out.variance = m2 / z;
  out.log_z = std::log(z) - phi0;
  return out;
}

// Moments of N(p, tau) truncated to {z : y z > 0}; quadrature route.
inline TiltedMoments truncated_gaussian_moments(double p, double tau, double y, int nodes) {
  // fold to the domain x >= 0 by the reflection z -> y z
  const double pf = y * p;
  const double sigma = std::sqrt(tau);
  const double x0 = std::max(pf, 0.0);
  const auto phi = [&](double x) { return (x - pf) * (x - pf) / (2.0 * tau); };
  const double phi0 = phi(x0);
  const double lo = std::max(0.0, pf - 12.0 * sigma);
  double hi = x0 + 12.0 * sigma;
  double h = sigma;
  if (pf < 0.0) {
    const double decay = tau / (-pf);  // exponential scale at the boundary
    hi = std::min(hi, 50.0 * decay);
    h = std::min(h, 20.0 * decay);
  }
  int panels = static_cast<int>(std::ceil((hi - lo) / h));
  panels = std::min(std::max(panels, 2), 200);

  const QuadratureRule& gl = gauss_legendre(nodes);
  double z = 0.0, m1 = 0.0;
  std::vector<double> xs, ws;
  xs.reserve(static_cast<std::size_t>(panels) * nodes);
  ws.reserve(static_cast<std::size_t>(panels) * nodes);
  for (int b = 0; b < panels; ++b) {
    const double a0 = lo + (hi - lo) * static_cast<double>(b) / panels;
    const double a1 = lo + (hi - lo) * static_cast<double>(b + 1) / panels;
    const double mid = 0.5 * (a0 + a1), half = 0.5 * (a1 - a0);
    for (int k = 0; k < nodes; ++k) {
      const double x = mid + half * gl.nodes[k];
      const double w = gl.weights[k] * half * std::exp(-(phi(x) - phi0));
      xs.push_back(x);
      ws.push_back(w);
      z += w;
      m1 += w * x;
    }
  }
  TiltedMoments out;
  const double mean_f = m1 / z;
  double m2 = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double d = xs[k] - mean_f;
    m2 += ws[k] * d * d;
  }
  out.mean = y * mean_f;
  out.variance = m2 / z;
  out.log_z = std::log(z) - phi0;
  return out;
}

}  // namespace detail

// Spike-and-slab posterior mean/variance for the Bernoulli-Gaussian prior
// under a Gaussian pseudo-observation r = x + N(0, tau); log-domain odds.
inline EstimatorOutput bg_mmse_denoise(double r, double tau, double rho, double sx) {
  if (!(tau > 0.0)) throw std::invalid_argument("bg_mmse_denoise: tau must be positive");
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("bg_mmse_denoise: rho in (0,1]");
  const double m = r * sx / (sx + tau);
  const double v = sx * tau / (sx + tau);
  // log odds of the spike against the slab
  const double logit = std::log((1.0 - rho) / rho) + 0.5 * std::log((tau + sx) / tau) -
                       0.5 * r * r * (1.0 / tau - 1.0 / (tau + sx));
  double pi;  // slab probability
  if (logit > 0.0) {
    const double e = std::exp(-logit);
    pi = e / (1.0 + e);
  } else {
    pi = 1.0 / (1.0 + std::exp(logit));
  }
  EstimatorOutput out;
  out.mean = pi * m;
  out.variance = std::max(pi * (v + m * m) - out.mean * out.mean, kVarianceFloor);
  return out;
}

// Gaussian-product posterior for the AWGN output channel.
inline EstimatorOutput awgn_mmse_output(double p, double tau_p, double y, double sigma2) {
  if (!(tau_p > 0.0)) throw std::invalid_argument("awgn_mmse_output: tau_p must be positive");
  if (!(sigma2 >= 0.0)) throw std::invalid_argument("awgn_mmse_output: sigma2 must be >= 0");
  EstimatorOutput out;
  if (std::isinf(sigma2)) {
    out.mean = p;
    out.variance = tau_p;
  } else {
    out.mean = (p * sigma2 + y * tau_p) / (sigma2 + tau_p);
    out.variance = tau_p * sigma2 / (sigma2 + tau_p);
  }
  out.variance = std::max(out.variance, kVarianceFloor);
  return out;
}

// Mean/variance of N(p, tau_p) truncated to {z : y z > 0} via scaled-erfc
// tail ratios; stable for |p|/sqrt(tau_p) far beyond +-8.
inline EstimatorOutput onebit_mmse_output(double p, double tau_p, double y) {
  if (!(tau_p > 0.0)) throw std::invalid_argument("onebit_mmse_output: tau_p must be positive");
  if (y != 1.0 && y != -1.0) throw std::invalid_argument("onebit_mmse_output: y must be +1 or -1");
  const double sq = std::sqrt(tau_p);
  const double a = y * p / sq;
  // h = phi(a)/Phi(a) = sqrt(2/pi)/erfcx(-a/sqrt(2))
  const double h = 0.797884560802865356 / detail::erfcx(-a * 0.7071067811865475244);
  EstimatorOutput out;
  out.mean = y * (y * p + sq * h);
  out.variance = std::max(tau_p * (1.0 - h * (h - a)), kVarianceFloor);
  return out;
}

// argmin_x [f(x) + (x-r)^2/(2 tau)] with variance tau/(1 + tau f''(xhat));
// closed form for quadratic families, safeguarded Newton otherwise.
inline EstimatorOutput map_prox(const PenaltySpec& spec, double r, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("map_prox: tau must be positive");
  EstimatorOutput out;
  switch (spec.family) {
    case PenaltyFamily::pure_quadratic:
    case PenaltyFamily::gaussian_output: {
      if (!spec.smooth()) throw std::invalid_argument("map_prox: penalty is not smooth");
      const double alpha = spec.curvature_lower();  // constant curvature
      const double center = (spec.family == PenaltyFamily::pure_quadratic) ? spec.center() : spec.y();
      out.mean = (r + alpha * tau * center) / (1.0 + alpha * tau);
      out.variance = tau / (1.0 + alpha * tau);
      break;
    }
    case PenaltyFamily::logcosh_quadratic: {
      out.mean = detail::prox_root(spec, r, tau, 1e-12 * (1.0 + std::abs(r) / tau));
      out.variance = tau / (1.0 + tau * spec.fpp(out.mean));
      break;
    }
    default:
      throw std::invalid_argument("map_prox: unsupported non-smooth family");
  }
  out.variance = std::max(out.variance, kVarianceFloor);
  return out;
}

// Numerical posterior moments of b(x) ~ exp(-f(x) - (x-r)^2/(2 tau)).
// The Dirac component of the Bernoulli-Gaussian prior is split off
// analytically; the one-bit channel integrates over its half-line.
inline EstimatorOutput quadrature_mmse(const PenaltySpec& spec, double r, double tau, int nodes = 31) {
  if (!(tau > 0.0)) throw std::invalid_argument("quadrature_mmse: tau must be positive");
  if (nodes < 5) throw std::invalid_argument("quadrature_mmse: too few nodes");
  EstimatorOutput out;
  switch (spec.family) {
    case PenaltyFamily::bernoulli_gaussian: {
      const double rho = spec.rho(), sx = spec.sx();
      // spike log-mass, sharing the (dropped) 1/sqrt(2 pi tau) factor with the slab
      const double log_spike = std::log1p(-rho) - r * r / (2.0 * tau);
      const PenaltySpec slab = PenaltySpec::pure_quadratic(1.0 / sx, 0.0);
      const auto mom = detail::tilted_moments_smooth(slab, r, tau, nodes);
      const double log_slab = mom.log_z - 0.5 * std::log(2.0 * 3.14159265358979323846 * sx) + std::log(rho);
      double pi;
      if (rho == 1.0) {
        pi = 1.0;
      } else {
        const double logit = log_spike - log_slab;
        pi = (logit > 0.0) ? std::exp(-logit) / (1.0 + std::exp(-logit)) : 1.0 / (1.0 + std::exp(logit));
      }
      out.mean = pi * mom.mean;
      out.variance = pi * (mom.variance + mom.mean * mom.mean) - out.mean * out.mean;
      break;
    }
    case PenaltyFamily::one_bit_output: {
      const auto mom = detail::truncated_gaussian_moments(r, tau, spec.y(), nodes);
      out.mean = mom.mean;
      out.variance = mom.variance;
      break;
    }
    default: {
      if (!spec.smooth()) throw std::invalid_argument("quadrature_mmse: penalty not integrable");
      const auto mom = detail::tilted_moments_smooth(spec, r, tau, nodes);
      out.mean = mom.mean;
      out.variance = mom.variance;
      break;
    }
  }
  out.variance = std::max(out.variance, kVarianceFloor);
  return out;
}

// Gaps |mmse_mean(f/T_k, tau T_k) - map_mean(f, tau)| over a decreasing
// temperature schedule; the tempered posterior hardens onto the prox point.
inline std::vector<double> tempered_limit_check(const PenaltySpec& spec, double r, double tau,
                                                const std::vector<double>& t_list, int nodes = 61) {
  if (!spec.smooth()) throw std::invalid_argument("tempered_limit_check: requires a smooth family");
  for (std::size_t k = 0; k < t_list.size(); ++k) {
    if (!(t_list[k] > 0.0)) throw std::invalid_argument("tempered_limit_check: temperatures must be positive");
    if (k > 0 && !(t_list[k] < t_list[k - 1]))
      throw std::invalid_argument("tempered_limit_check: temperatures must be strictly decreasing");
  }
  const double map_mean = map_prox(spec, r, tau).mean;
  std::vector<double> gaps;
  gaps.reserve(t_list.size());
  for (double t : t_list) {
    const auto est = quadrature_mmse(spec.with_temperature(t), r, tau * t, nodes);
    gaps.push_back(std::abs(est.mean - map_mean));
  }
  return gaps;
}

// Mean and variance of the bare prior/penalty density; used to initialize
// iterative solvers.
inline EstimatorOutput prior_moments(const PenaltySpec& spec) {
  switch (spec.family) {
    case PenaltyFamily::bernoulli_gaussian:
      return {0.0, spec.rho() * spec.sx()};
    case PenaltyFamily::pure_quadratic:
      return {spec.center(), spec.temperature / spec.alpha()};
    case PenaltyFamily::gaussian_output:
      return {spec.y(), spec.sigma2() * spec.temperature};
    case PenaltyFamily::logcosh_quadratic: {
      const auto mom = detail::tilted_moments_smooth(spec, 0.0, 1e12, 61);
      return {mom.mean, mom.variance};
    }
    default:
      throw std::logic_error("prior_moments: family has no prior moments");
  }
}

// Componentwise (mean, variance) map for one side of the model: posterior
// moments in MMSE mode, prox and inverse curvature in MAP mode.
class ScalarEstimator {
 public:
  ScalarEstimator() = default;
  ScalarEstimator(EstimatorMode mode, std::vector<PenaltySpec> specs, int quad_nodes = 31)
      : mode_(mode), specs_(std::move(specs)), quad_nodes_(quad_nodes) {}

  std::size_t size() const { return specs_.size(); }
  EstimatorMode mode() const { return mode_; }
  const std::vector<PenaltySpec>& specs() const { return specs_; }
  const PenaltySpec& spec(std::size_t i) const { return specs_[i]; }

  EstimatorOutput eval(std::size_t i, double r, double tau) const {
    const PenaltySpec& s = specs_[i];
    if (mode_ == EstimatorMode::map) return map_prox(s, r, tau);
    switch (s.family) {
      case PenaltyFamily::bernoulli_gaussian:
        return bg_mmse_denoise(r, tau, s.rho(), s.sx());
      case PenaltyFamily::gaussian_output:
        return awgn_mmse_output(r, tau, s.y(), s.sigma2() * s.temperature);
      case PenaltyFamily::one_bit_output:
        return onebit_mmse_output(r, tau, s.y());
      case PenaltyFamily::pure_quadratic: {
        const double alpha = s.curvature_lower();
        EstimatorOutput out;
        out.mean = (r + alpha * tau * s.center()) / (1.0 + alpha * tau);
        out.variance = std::max(tau / (1.0 + alpha * tau), kVarianceFloor);
        return out;
      }
      default:
        return quadrature_mmse(s, r, tau, quad_nodes_);
    }
  }

 private:
  EstimatorMode mode_ = EstimatorMode::mmse;
  std::vector<PenaltySpec> specs_;
  int quad_nodes_ = 31;
};

}  // namespace bfegamp
