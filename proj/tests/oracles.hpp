#ifndef SHIFTLAB_TESTS_ORACLES_HPP
#define SHIFTLAB_TESTS_ORACLES_HPP

// Independent reference computations for the unit tests. These are written
// from the defining formulas in long double, deliberately without reusing
// library helpers.

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

inline constexpr long double kPi = 3.141592653589793238462643383279502884L;
inline constexpr long double kTwoPi = 2.0L * kPi;

inline long double w(int k) { return kTwoPi * k; }

// sum (2 pi k)^{2 beta} f_k^2
inline long double sobolev_norm(const std::vector<double>& f, double beta) {
  long double s = 0;
  for (std::size_t i = 0; i < f.size(); ++i) s += std::pow(w(static_cast<int>(i) + 1), 2.0L * beta) * f[i] * f[i];
  return s;
}

// ||f'||^2 = sum (2 pi k)^2 f_k^2
inline long double deriv_norm(const std::vector<double>& f) {
  long double s = 0;
  for (std::size_t i = 0; i < f.size(); ++i) s += w(static_cast<int>(i) + 1) * w(static_cast<int>(i) + 1) * f[i] * f[i];
  return s;
}

// Left side of the bandwidth equation by direct summation.
inline long double bandwidth_lhs(double beta, double eps, long double W) {
  long double s = 0;
  for (int k = 1; k < W + 1; ++k) {
    const long double t = std::pow(W / k, static_cast<long double>(beta) - 1) - 1;
    if (t > 0) s += t * std::pow(w(k), 2.0L * beta);
  }
  return static_cast<long double>(eps) * eps * s;
}

// Bandwidth by plain bisection on [1e-9, 1e9] in long double.
inline long double bandwidth(double beta, double L, double eps) {
  long double lo = 1.0L, hi = 1.0L;
  while (bandwidth_lhs(beta, eps, hi) < L) hi *= 1.5L;
  lo = hi / 1.5L;
  if (lo < 1) lo = 1;
  for (int i = 0; i < 300; ++i) {
    const long double mid = 0.5L * (lo + hi);
    (bandwidth_lhs(beta, eps, mid) < L ? lo : hi) = mid;
  }
  return 0.5L * (lo + hi);
}

inline long double pinsker(double beta, long double W, int k) {
  const long double v = 1 - std::pow(static_cast<long double>(k) / W, static_cast<long double>(beta) - 1);
  return v > 0 ? v : 0;
}

// sum (2 pi k)^2 [(1-h)^2 f^2 + eps^2 h^2]
inline long double risk(const std::vector<double>& f, const std::vector<double>& h, double eps) {
  const std::size_t K = std::max(f.size(), h.size());
  long double s = 0;
  for (std::size_t i = 0; i < K; ++i) {
    const long double fk = i < f.size() ? f[i] : 0.0;
    const long double hk = i < h.size() ? h[i] : 0.0;
    s += w(static_cast<int>(i) + 1) * w(static_cast<int>(i) + 1) * ((1 - hk) * (1 - hk) * fk * fk + eps * eps * hk * hk);
  }
  return s;
}

// Weighted contrast sum h_k (a cos + b sin)^2 from raw arrays.
inline long double contrast(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& h,
                            long double tau) {
  long double s = 0;
  for (std::size_t i = 0; i < h.size() && i < a.size(); ++i) {
    const long double arg = w(static_cast<int>(i) + 1) * tau;
    const long double y = a[i] * std::cos(arg) + b[i] * std::sin(arg);
    s += h[i] * y * y;
  }
  return s;
}

// Argmax of g on a dense uniform grid followed by a fine local rescan.
inline long double dense_argmax(const std::function<long double(long double)>& g, long double lo, long double hi,
                                int n) {
  long double best = lo, bv = g(lo);
  for (int i = 1; i <= n; ++i) {
    const long double t = lo + (hi - lo) * i / n;
    const long double v = g(t);
    if (v > bv) {
      bv = v;
      best = t;
    }
  }
  long double step = (hi - lo) / n;
  for (int pass = 0; pass < 6; ++pass) {
    const long double a = std::max(lo, best - step), b = std::min(hi, best + step);
    for (int i = 0; i <= 200; ++i) {
      const long double t = a + (b - a) * i / 200;
      const long double v = g(t);
      if (v > bv) {
        bv = v;
        best = t;
      }
    }
    step /= 100;
  }
  return best;
}

// Integral of (pi')^2 / pi for pi(x) = cos^2(pi x / (2 t0)) / t0 by the
// midpoint rule.
inline long double cos2_prior_info(double t0, int n = 200000) {
  long double s = 0;
  const long double h = 2.0L * t0 / n;
  for (int i = 0; i < n; ++i) {
    const long double x = -t0 + (i + 0.5L) * h;
    const long double c = std::cos(kPi * x / (2 * t0));
    const long double sn = std::sin(kPi * x / (2 * t0));
    const long double p = c * c / t0;
    const long double dp = -2 * c * sn * (kPi / (2 * t0)) / t0;
    s += dp * dp / p * h;
  }
  return s;
}

// Closed-form CDF of the cosine-squared prior, by numerical integration of
// its density.
inline long double cos2_prior_cdf_numeric(double t0, long double x, int n = 20000) {
  if (x <= -t0) return 0;
  if (x >= t0) return 1;
  long double s = 0;
  const long double h = (x + t0) / n;
  for (int i = 0; i < n; ++i) {
    const long double u = -t0 + (i + 0.5L) * h;
    const long double c = std::cos(kPi * u / (2 * t0));
    s += c * c / t0 * h;
  }
  return s;
}

}  // namespace oracle

#endif
