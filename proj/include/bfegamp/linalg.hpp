#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bfegamp/rng.hpp"

namespace bfegamp {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(const Vec& a) {
  for (double x : a)
    if (!std::isfinite(x)) return false;
  return true;
}

// Dense row-major matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const Vec& data() const { return data_; }
  Vec& data() { return data_; }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  Vec data_;
};

inline Vec matvec(const DenseMatrix& a, const Vec& x) {
  if (a.cols() != x.size()) throw std::invalid_argument("matvec: dimension mismatch");
  Vec y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    const double* row = a.data().data() + i * a.cols();
    for (std::size_t j = 0; j < a.cols(); ++j) s += row[j] * x[j];
    y[i] = s;
  }
  return y;
}

inline Vec matvec_transposed(const DenseMatrix& a, const Vec& y) {
  if (a.rows() != y.size()) throw std::invalid_argument("matvec_transposed: dimension mismatch");
  Vec x(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double yi = y[i];
    const double* row = a.data().data() + i * a.cols();
    for (std::size_t j = 0; j < a.cols(); ++j) x[j] += row[j] * yi;
  }
  return x;
}

// S_ij = A_ij^2, same shape.
inline DenseMatrix elementwise_square(const DenseMatrix& a) {
  DenseMatrix s(a.rows(), a.cols());
  for (std::size_t k = 0; k < a.data().size(); ++k) s.data()[k] = a.data()[k] * a.data()[k];
  return s;
}

struct QrFactors {
  DenseMatrix q;  // rows x cols, orthonormal columns
  DenseMatrix r;  // cols x cols, upper triangular
};

// Thin Householder QR, rows >= cols.
inline QrFactors householder_qr(const DenseMatrix& m) {
  const std::size_t rows = m.rows(), cols = m.cols();
  if (rows < cols) throw std::invalid_argument("householder_qr: requires rows >= cols");
  DenseMatrix work = m;
  std::vector<Vec> reflectors;
  reflectors.reserve(cols);

  for (std::size_t k = 0; k < cols; ++k) {
    Vec v(rows - k, 0.0);
    double norm = 0.0;
    for (std::size_t i = k; i < rows; ++i) {
      v[i - k] = work(i, k);
      norm += v[i - k] * v[i - k];
    }
    norm = std::sqrt(norm);
    double beta = 0.0;
    if (norm > 0.0) {
      const double alpha = (v[0] >= 0.0) ? -norm : norm;
      v[0] -= alpha;
      double vnorm2 = 0.0;
      for (double t : v) vnorm2 += t * t;
      if (vnorm2 > 0.0) {
        beta = 2.0 / vnorm2;
        for (std::size_t j = k; j < cols; ++j) {
          double s = 0.0;
          for (std::size_t i = k; i < rows; ++i) s += v[i - k] * work(i, j);
          s *= beta;
          for (std::size_t i = k; i < rows; ++i) work(i, j) -= s * v[i - k];
        }
      }
    }
    // stash beta in v's tail slot convention: keep (v, beta) pair
    v.push_back(beta);
    reflectors.push_back(std::move(v));
  }

  QrFactors out;
  out.r = DenseMatrix(cols, cols);
  for (std::size_t i = 0; i < cols; ++i)
    for (std::size_t j = i; j < cols; ++j) out.r(i, j) = work(i, j);

  // Accumulate Q = H_0 ... H_{cols-1} applied to the first cols identity columns.
  out.q = DenseMatrix(rows, cols);
  for (std::size_t j = 0; j < cols; ++j) {
    Vec e(rows, 0.0);
    e[j] = 1.0;
    for (std::size_t k = cols; k-- > 0;) {
      const Vec& v = reflectors[k];
      const double beta = v.back();
      if (beta == 0.0) continue;
      double s = 0.0;
      for (std::size_t i = k; i < rows; ++i) s += v[i - k] * e[i];
      s *= beta;
      for (std::size_t i = k; i < rows; ++i) e[i] -= s * v[i - k];
    }
    for (std::size_t i = 0; i < rows; ++i) out.q(i, j) = e[i];
  }
  return out;
}

// sigma_max^2 / mean(sigma_i^2).
inline double peak_to_average(const Vec& sigmas) {
  if (sigmas.empty()) throw std::invalid_argument("peak_to_average: empty input");
  double peak = 0.0, sum = 0.0;
  for (double s : sigmas) {
    if (s < 0.0) throw std::invalid_argument("peak_to_average: negative entry");
    peak = std::max(peak, s * s);
    sum += s * s;
  }
  if (sum == 0.0) throw std::invalid_argument("peak_to_average: all-zero input");
  return peak / (sum / static_cast<double>(sigmas.size()));
}

struct SpectralSpec {
  std::size_t m = 0, n = 0;
  double kappa_target = 1.0;
  std::uint64_t seed = 0;
};

namespace detail {

// kappa(t) = r / sum_{i=0}^{r-1} t^i for t = rho^2; decreasing from r to 1.
inline double kappa_of_t(double t, std::size_t r) {
  double sum = 0.0, p = 1.0;
  for (std::size_t i = 0; i < r; ++i) {
    sum += p;
    p *= t;
  }
  return static_cast<double>(r) / sum;
}

inline DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  DenseMatrix g(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) g(i, j) = rng.gaussian();
  return g;
}

}  // namespace detail

// Geometric singular values sigma_i = rho^(i-1), sigma_1 = 1, with rho chosen
// by bisection so the peak-to-average ratio of sigma^2 hits kappa_target.
// U and V come from QR of two independent seeded Gaussian draws
// (streams 0 and 1 of the given seed).
inline DenseMatrix build_spectral_matrix(const SpectralSpec& spec) {
  const std::size_t m = spec.m, n = spec.n;
  if (m < 1 || n < 1) throw std::invalid_argument("build_spectral_matrix: empty shape");
  const std::size_t r = std::min(m, n);
  if (spec.kappa_target < 1.0 || spec.kappa_target > static_cast<double>(r))
    throw std::invalid_argument("build_spectral_matrix: kappa_target outside [1, min(m,n)]");

  double t;
  if (spec.kappa_target == 1.0) {
    t = 1.0;
  } else {
    double lo = 0.0, hi = 1.0;  // kappa(0) = r, kappa(1) = 1
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (detail::kappa_of_t(mid, r) > spec.kappa_target)
        lo = mid;
      else
        hi = mid;
      if (hi - lo < 1e-18) break;
    }
    t = 0.5 * (lo + hi);
  }
  const double rho = std::sqrt(t);

  Rng rng_u(spec.seed, 0), rng_v(spec.seed, 1);
  const DenseMatrix qu = householder_qr(detail::gaussian_matrix(m, r, rng_u)).q;
  const DenseMatrix qv = householder_qr(detail::gaussian_matrix(n, r, rng_v)).q;

  Vec sigma(r);
  sigma[0] = 1.0;
  for (std::size_t i = 1; i < r; ++i) sigma[i] = sigma[i - 1] * rho;

  DenseMatrix a(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < r; ++k) s += qu(i, k) * sigma[k] * qv(j, k);
      a(i, j) = s;
    }
  return a;
}

// Conjugate gradient on an SPD operator with warm start x0. Stops after
// max_iters or once the residual norm drops to tol * ||rhs||.
template <class Apply>
Vec cg_solve(Apply&& apply, const Vec& rhs, const Vec& x0, int max_iters, double tol) {
  if (rhs.size() != x0.size()) throw std::invalid_argument("cg_solve: dimension mismatch");
  Vec x = x0;
  Vec res = apply(x);
  for (std::size_t i = 0; i < res.size(); ++i) res[i] = rhs[i] - res[i];
  Vec dir = res;
  double rs = dot(res, res);
  const double stop = tol * norm2(rhs);
  for (int it = 0; it < max_iters; ++it) {
    if (std::sqrt(rs) <= stop) break;
    Vec ad = apply(dir);
    const double denom = dot(dir, ad);
    if (!std::isfinite(denom) || denom == 0.0) throw std::runtime_error("cg_solve: non-finite or degenerate curvature");
    const double alpha = rs / denom;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += alpha * dir[i];
      res[i] -= alpha * ad[i];
    }
    const double rs_next = dot(res, res);
    if (!std::isfinite(rs_next)) throw std::runtime_error("cg_solve: non-finite residual");
    for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = res[i] + (rs_next / rs) * dir[i];
    rs = rs_next;
  }
  return x;
}

// Cholesky solve of a dense SPD system; the factor works on a copy.
inline Vec cholesky_solve(DenseMatrix a, Vec b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n) throw std::invalid_argument("cholesky_solve: dimension mismatch");
  for (std::size_t k = 0; k < n; ++k) {
    double d = a(k, k);
    for (std::size_t j = 0; j < k; ++j) d -= a(k, j) * a(k, j);
    if (d <= 0.0 || !std::isfinite(d)) throw std::runtime_error("cholesky_solve: not positive definite");
    const double lkk = std::sqrt(d);
    a(k, k) = lkk;
    for (std::size_t i = k + 1; i < n; ++i) {
      double s = a(i, k);
      for (std::size_t j = 0; j < k; ++j) s -= a(i, j) * a(k, j);
      a(i, k) = s / lkk;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {  // L y = b
    double s = b[i];
    for (std::size_t j = 0; j < i; ++j) s -= a(i, j) * b[j];
    b[i] = s / a(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {  // L^T x = y
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a(j, i) * b[j];
    b[i] = s / a(i, i);
  }
  return b;
}

// Largest eigenvalue of an SPD operator by power iteration with a seeded
// start vector; returns the final Rayleigh quotient.
template <class Apply>
double power_iteration(Apply&& apply, std::size_t dim, int iters, std::uint64_t seed = 17) {
  Rng rng(seed, 99);
  Vec v(dim);
  for (auto& t : v) t = rng.gaussian();
  const double nv = norm2(v);
  for (auto& t : v) t /= nv;
  double lambda = 0.0;
  for (int it = 0; it < iters; ++it) {
    Vec w = apply(v);
    lambda = dot(v, w);
    const double nw = norm2(w);
    if (nw == 0.0) return 0.0;
    for (auto& t : w) t /= nw;
    v = std::move(w);
  }
  return lambda;
}

}  // namespace bfegamp
