#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bfegamp {

enum class PenaltyFamily {
  bernoulli_gaussian,  // prior (1-rho) d0 + rho N(0, sx); spike, not smooth
  gaussian_output,     // f(z) = (z - y)^2 / (2 sigma2)
  one_bit_output,      // f(z) = 0 if y z > 0 else +inf
  logcosh_quadratic,   // f(x) = alpha x^2 / 2 + ln cosh(c x), f'' in [alpha, alpha + c^2]
  pure_quadratic,      // f(x) = alpha (x - center)^2 / 2
};

namespace detail {

inline double log_cosh(double u) {
  const double a = std::abs(u);
  return a + std::log1p(std::exp(-2.0 * a)) - 0.6931471805599453094;  // ln 2
}

}  // namespace detail

// One scalar penalty component with an optional temperature: every f-related
// accessor reports the tempered penalty f/T.
struct PenaltySpec {
  PenaltyFamily family = PenaltyFamily::pure_quadratic;
  double p1 = 1.0, p2 = 0.0;
  double temperature = 1.0;

  static PenaltySpec bernoulli_gaussian(double rho, double sx) {
    if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("bernoulli_gaussian: rho must be in (0,1]");
    if (!(sx > 0.0)) throw std::invalid_argument("bernoulli_gaussian: sx must be positive");
    return {PenaltyFamily::bernoulli_gaussian, rho, sx, 1.0};
  }
  static PenaltySpec gaussian_output(double y, double sigma2) {
    if (!(sigma2 >= 0.0)) throw std::invalid_argument("gaussian_output: sigma2 must be >= 0");
    return {PenaltyFamily::gaussian_output, y, sigma2, 1.0};
  }
  static PenaltySpec one_bit_output(double y) {
    if (y != 1.0 && y != -1.0) throw std::invalid_argument("one_bit_output: y must be +1 or -1");
    return {PenaltyFamily::one_bit_output, y, 0.0, 1.0};
  }
  static PenaltySpec logcosh_quadratic(double alpha, double c) {
    if (!(alpha > 0.0)) throw std::invalid_argument("logcosh_quadratic: alpha must be positive");
    if (!(c >= 0.0)) throw std::invalid_argument("logcosh_quadratic: c must be >= 0");
    return {PenaltyFamily::logcosh_quadratic, alpha, c, 1.0};
  }
  static PenaltySpec pure_quadratic(double alpha, double center) {
    if (!(alpha > 0.0)) throw std::invalid_argument("pure_quadratic: alpha must be positive");
    return {PenaltyFamily::pure_quadratic, alpha, center, 1.0};
  }

  PenaltySpec with_temperature(double t) const {
    if (!(t > 0.0)) throw std::invalid_argument("with_temperature: T must be positive");
    PenaltySpec s = *this;
    s.temperature = t;
    return s;
  }

  double rho() const { return p1; }
  double sx() const { return p2; }
  double y() const { return p1; }
  double sigma2() const { return p2; }
  double alpha() const { return p1; }
  double c() const { return p2; }
  double center() const { return p2; }

  bool smooth() const {
    switch (family) {
      case PenaltyFamily::gaussian_output:
        return p2 > 0.0;
      case PenaltyFamily::logcosh_quadratic:
      case PenaltyFamily::pure_quadratic:
        return true;
      default:
        return false;
    }
  }

  double f(double x) const {
    switch (family) {
      case PenaltyFamily::gaussian_output: {
        const double d = x - p1;
        return d * d / (2.0 * p2) / temperature;
      }
      case PenaltyFamily::logcosh_quadratic:
        return (0.5 * p1 * x * x + detail::log_cosh(p2 * x)) / temperature;
      case PenaltyFamily::pure_quadratic: {
        const double d = x - p2;
        return 0.5 * p1 * d * d / temperature;
      }
      case PenaltyFamily::one_bit_output:
        return (p1 * x > 0.0) ? 0.0 : std::numeric_limits<double>::infinity();
      default:
        throw std::logic_error("PenaltySpec::f: family has no pointwise penalty");
    }
  }

  double fp(double x) const {
    switch (family) {
      case PenaltyFamily::gaussian_output:
        return (x - p1) / p2 / temperature;
      case PenaltyFamily::logcosh_quadratic:
        return (p1 * x + p2 * std::tanh(p2 * x)) / temperature;
      case PenaltyFamily::pure_quadratic:
        return p1 * (x - p2) / temperature;
      default:
        throw std::logic_error("PenaltySpec::fp: penalty not differentiable");
    }
  }

  double fpp(double x) const {
    switch (family) {
      case PenaltyFamily::gaussian_output:
        return 1.0 / p2 / temperature;
      case PenaltyFamily::logcosh_quadratic: {
        const double th = std::tanh(p2 * x);
        return (p1 + p2 * p2 * (1.0 - th * th)) / temperature;
      }
      case PenaltyFamily::pure_quadratic:
        return p1 / temperature;
      default:
        throw std::logic_error("PenaltySpec::fpp: penalty not twice differentiable");
    }
  }

  // Curvature bounds A <= f'' <= B of the tempered penalty.
  double curvature_lower() const {
    switch (family) {
      case PenaltyFamily::gaussian_output:
        return 1.0 / p2 / temperature;
      case PenaltyFamily::logcosh_quadratic:
        return p1 / temperature;
      case PenaltyFamily::pure_quadratic:
        return p1 / temperature;
      default:
        throw std::logic_error("PenaltySpec::curvature_lower: not smooth");
    }
  }
  double curvature_upper() const {
    switch (family) {
      case PenaltyFamily::gaussian_output:
        return 1.0 / p2 / temperature;
      case PenaltyFamily::logcosh_quadratic:
        return (p1 + p2 * p2) / temperature;
      case PenaltyFamily::pure_quadratic:
        return p1 / temperature;
      default:
        throw std::logic_error("PenaltySpec::curvature_upper: not smooth");
    }
  }

  // Scale of the analyticity strip of e^{-f} around the real axis; infinity
  // for entire-Gaussian families. Drives quadrature panel sizing.
  double analyticity_scale() const {
    if (family == PenaltyFamily::logcosh_quadratic && p2 > 0.0)
      return 3.14159265358979323846 / (2.0 * p2);
    return std::numeric_limits<double>::infinity();
  }
};

}  // namespace bfegamp
