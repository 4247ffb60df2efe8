#ifndef SHIFTLAB_WEIGHTS_HPP
#define SHIFTLAB_WEIGHTS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "signal_model.hpp"

namespace shiftlab {

enum class WeightKind { Projection, Pinsker, Corrected, Custom };

inline const char* to_string(WeightKind k) {
  switch (k) {
    case WeightKind::Projection: return "projection";
    case WeightKind::Pinsker: return "pinsker";
    case WeightKind::Corrected: return "corrected";
    case WeightKind::Custom: return "custom";
  }
  return "?";
}

/// Filter weights h_1..h_K in [0, 1], zero beyond `support()`.
///
/// The construction parameters are kept next to the values: `N` for
/// projection weights, `(beta, W)` for Pinsker weights and `(beta, W, gamma)`
/// for the corrected (head raised to one) weights.
struct WeightSequence {
  WeightKind kind = WeightKind::Custom;
  std::vector<double> values;
  int N = 0;
  double beta = 0.0;
  double W = 0.0;
  double gamma = 0.0;
  bool clipped = false;  // custom input had entries outside [0, 1]

  int support() const noexcept { return static_cast<int>(values.size()); }

  double at(int k) const noexcept {
    return (k >= 1 && k <= support()) ? values[static_cast<std::size_t>(k - 1)] : 0.0;
  }

  /// Largest k with a nonzero weight (0 if all weights vanish).
  int effective_support() const noexcept {
    for (int k = support(); k >= 1; --k) {
      if (at(k) != 0.0) return k;
    }
    return 0;
  }

  friend bool operator==(const WeightSequence&, const WeightSequence&) = default;
};

inline WeightSequence projection_weights(int N, int K) {
  if (N < 1) throw InvalidInput("projection_weights: N must be >= 1");
  if (K < N) throw InvalidInput("projection_weights: K must be >= N");
  WeightSequence w;
  w.kind = WeightKind::Projection;
  w.N = N;
  w.values.assign(static_cast<std::size_t>(K), 0.0);
  std::fill_n(w.values.begin(), N, 1.0);
  return w;
}

/// Arbitrary weights, projected onto [0, 1]; `clipped` records whether the
/// projection changed anything.
inline WeightSequence custom_weights(std::vector<double> values) {
  if (values.empty()) throw InvalidInput("custom_weights: empty weight list");
  if (!all_finite(values)) throw InvalidInput("custom_weights: weights must be finite");
  WeightSequence w;
  w.kind = WeightKind::Custom;
  for (double& v : values) {
    const double c = std::clamp(v, 0.0, 1.0);
    if (c != v) w.clipped = true;
    v = c;
  }
  w.values = std::move(values);
  return w;
}

/// G(W) = eps^2 sum_k [(W/k)^{beta-1} - 1]_+ (2 pi k)^{2 beta}.
/// Continuous and nondecreasing in W; only k < W contribute.
inline double bandwidth_constraint(const SobolevBall& ball, double eps, double W) {
  double s = 0.0;
  for (int k = 1; k < W; ++k) {
    const double t = std::pow(W / k, ball.beta - 1.0) - 1.0;
    if (t > 0.0) s += t * freq_pow(k, 2.0 * ball.beta);
  }
  return eps * eps * s;
}

struct BandwidthSolution {
  double W = 0.0;
  double residual = 0.0;  // G(W) - L
  int iterations = 0;
};

/// Largest bandwidth the solver will bracket. G(W) costs O(W) to evaluate,
/// so noise levels needing more coefficients are reported as failures.
inline constexpr double kMaxBandwidth = 1e7;

/// Solves G(W) = L by bracket doubling from [1, 2] followed by bisection,
/// stopping once |G(W) - L| <= tol * L.
inline BandwidthSolution solve_bandwidth(const SobolevBall& ball, double eps, double tol = 1e-10,
                                         int max_iter = 200) {
  if (!(eps > 0.0)) throw InvalidInput("solve_bandwidth: eps must be > 0");
  if (!(tol > 0.0)) throw InvalidInput("solve_bandwidth: tol must be > 0");
  const double target = ball.L;
  double lo = 1.0;
  double hi = 2.0;
  int it = 0;
  while (bandwidth_constraint(ball, eps, hi) < target) {
    if (++it >= max_iter || !(hi <= kMaxBandwidth)) {
      throw SolverFailure("solve_bandwidth: could not bracket the root below W = 1e7 (eps too small?)", lo, hi);
    }
    lo = hi;
    hi *= 2.0;
  }
  while (true) {
    const double mid = 0.5 * (lo + hi);
    const double g = bandwidth_constraint(ball, eps, mid);
    ++it;
    if (std::abs(g - target) <= tol * target) return {mid, g - target, it};
    if (it >= max_iter || mid <= lo || mid >= hi) {
      throw SolverFailure("solve_bandwidth: bisection did not reach tolerance", lo, hi);
    }
    (g < target ? lo : hi) = mid;
  }
}

/// Leading-order bandwidth as eps -> 0.
inline double bandwidth_asymptotic(const SobolevBall& ball, double eps) {
  if (!(eps > 0.0)) throw InvalidInput("bandwidth_asymptotic: eps must be > 0");
  const double b = ball.beta;
  const double num = ball.L * (b + 2.0) * (2.0 * b + 1.0);
  const double den = eps * eps * std::pow(kTwoPi, 2.0 * b) * (b - 1.0);
  return std::pow(num / den, 1.0 / (2.0 * b + 1.0));
}

namespace detail {
inline double pinsker_value(double beta, double W, int k) {
  return std::max(0.0, 1.0 - std::pow(k / W, beta - 1.0));
}

inline int required_support(double W) { return static_cast<int>(std::ceil(W)); }
}  // namespace detail

/// Minimax linear weights q_k = [1 - (k/W)^{beta-1}]_+ over the Sobolev ball.
inline WeightSequence pinsker_weights(const SobolevBall& ball, double W, int K) {
  if (!(W > 0.0) || !std::isfinite(W)) throw InvalidInput("pinsker_weights: W must be > 0");
  if (K < detail::required_support(W)) {
    throw InvalidInput("pinsker_weights: K = " + std::to_string(K) +
                       " would clip the support (needs K >= ceil(W))");
  }
  WeightSequence w;
  w.kind = WeightKind::Pinsker;
  w.beta = ball.beta;
  w.W = W;
  w.values.resize(static_cast<std::size_t>(K));
  for (int k = 1; k <= K; ++k) {
    w.values[static_cast<std::size_t>(k - 1)] = detail::pinsker_value(ball.beta, W, k);
  }
  return w;
}

/// Index of the last head coefficient, floor(gamma * W).
inline int head_cutoff(double gamma, double W) {
  return static_cast<int>(std::floor(gamma * W));
}

/// Pinsker weights with the head k <= floor(gamma W) raised to one.
inline WeightSequence corrected_weights(const SobolevBall& ball, double W, double gamma, int K) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw InvalidInput("corrected_weights: gamma must lie in (0, 1)");
  }
  WeightSequence w = pinsker_weights(ball, W, K);
  w.kind = WeightKind::Corrected;
  w.gamma = gamma;
  const int head = std::min(head_cutoff(gamma, W), K);
  std::fill_n(w.values.begin(), head, 1.0);
  return w;
}

/// Default head fraction 1 / log(eps^-2); needs eps < e^{-1/2}.
inline double default_gamma(double eps) {
  if (!(eps > 0.0)) throw InvalidInput("default_gamma: eps must be > 0");
  const double lg = std::log(1.0 / (eps * eps));
  if (!(lg > 1.0)) {
    throw InvalidInput("default gamma = 1/log(eps^-2) needs eps < exp(-1/2); pass gamma explicitly");
  }
  return 1.0 / lg;
}

struct PriorVarianceMode {
  enum class Kind { Saddle, Truncated } kind = Kind::Saddle;
  double gamma = 0.0;  // Truncated only
  double W = 0.0;      // Truncated only

  static PriorVarianceMode saddle() { return {}; }
  static PriorVarianceMode truncated(double gamma, double W) {
    return {Kind::Truncated, gamma, W};
  }
};

/// Gaussian prior variances whose posterior-mean weights equal h:
///   saddle:    s_k^2 = eps^2 h_k / (1 - h_k)
///   truncated: 0 on the head k <= floor(gamma W), (1 - gamma) s_k^2 beyond.
inline std::vector<double> prior_variances(const WeightSequence& h, double eps,
                                           const PriorVarianceMode& mode) {
  if (!(eps > 0.0)) throw InvalidInput("prior_variances: eps must be > 0");
  const bool truncated = mode.kind == PriorVarianceMode::Kind::Truncated;
  if (truncated && !(mode.gamma > 0.0 && mode.gamma < 1.0)) {
    throw InvalidInput("prior_variances: gamma must lie in (0, 1)");
  }
  const int head = truncated ? head_cutoff(mode.gamma, mode.W) : 0;
  std::vector<double> out(static_cast<std::size_t>(h.support()), 0.0);
  for (int k = head + 1; k <= h.support(); ++k) {
    const double hk = h.at(k);
    if (hk == 0.0) continue;
    if (hk >= 1.0) {
      throw SingularVariance("prior_variances: weight h_" + std::to_string(k) +
                                 " = 1 needs infinite prior variance",
                             k);
    }
    const double s2 = eps * eps * hk / (1.0 - hk);
    out[static_cast<std::size_t>(k - 1)] = truncated ? (1.0 - mode.gamma) * s2 : s2;
  }
  return out;
}

/// Posterior shrinkage factor sigma^2 / (eps^2 + sigma^2).
inline double shrinkage_from_variance(double sigma2, double eps) {
  if (sigma2 == 0.0) return 0.0;
  return sigma2 / (eps * eps + sigma2);
}

/// Second-order risk term sum_k (2 pi k)^2 [(1 - h_k)^2 f_k^2 + eps^2 h_k^2].
inline double risk_functional(const SignalSpectrum& f, const WeightSequence& h, double eps) {
  if (!(eps >= 0.0)) throw InvalidInput("risk_functional: eps must be >= 0");
  const int K = std::max(f.support(), h.support());
  double s = 0.0;
  for (int k = 1; k <= K; ++k) {
    const double hk = h.at(k);
    const double fk = f.coeff(k);
    s += freq_sq(k) * ((1.0 - hk) * (1.0 - hk) * fk * fk + eps * eps * hk * hk);
  }
  return s;
}

/// Same functional with f given as raw coefficients (used for the saddle
/// signal s_k, which need not be a valid SignalSpectrum when all zero).
inline double risk_functional(std::span<const double> f, const WeightSequence& h, double eps) {
  std::vector<double> c(f.begin(), f.end());
  if (c.empty()) c.push_back(0.0);
  return risk_functional(SignalSpectrum(std::move(c)), h, eps);
}

/// Least favourable signal s_k = sqrt(s_k^2) paired with Pinsker weights q.
inline std::vector<double> saddle_signal(const WeightSequence& q, double eps) {
  std::vector<double> s = prior_variances(q, eps, PriorVarianceMode::saddle());
  for (double& x : s) x = std::sqrt(x);
  return s;
}

/// Asymptotic constant C*(beta, L) of the minimax second-order term.
inline double minimax_constant(const SobolevBall& ball) {
  const double b = ball.beta;
  return (1.0 / 3.0) *
         std::pow((b - 1.0) / (kTwoPi * (b + 2.0)), (2.0 * b - 2.0) / (2.0 * b + 1.0)) *
         std::pow(ball.L * (2.0 * b + 1.0), 3.0 / (2.0 * b + 1.0));
}

struct MinimaxValue {
  double r_exact = 0.0;  // eps^2 sum (2 pi k)^2 q_k
  double r_asym = 0.0;   // C* eps^{(4 beta - 4)/(2 beta + 1)}
  double c_star = 0.0;
  double W = 0.0;
};

inline double minimax_risk_of(const WeightSequence& q, double eps) {
  double s = 0.0;
  for (int k = 1; k <= q.support(); ++k) s += freq_sq(k) * q.at(k);
  return eps * eps * s;
}

inline MinimaxValue minimax_value(const SobolevBall& ball, double eps, double tol = 1e-10) {
  const BandwidthSolution bw = solve_bandwidth(ball, eps, tol);
  const WeightSequence q = pinsker_weights(ball, bw.W, detail::required_support(bw.W));
  MinimaxValue out;
  out.W = bw.W;
  out.r_exact = minimax_risk_of(q, eps);
  out.c_star = minimax_constant(ball);
  out.r_asym = out.c_star * std::pow(eps, (4.0 * ball.beta - 4.0) / (2.0 * ball.beta + 1.0));
  return out;
}

struct AssumptionBParams {
  double rho1 = 0.0;
  double c1 = 0.0;

  AssumptionBParams(double r, double c) : rho1(r), c1(c) {
    if (!(r > 0.0) || !(c > 0.0)) throw InvalidInput("assumption B params must be positive");
  }

  friend bool operator==(const AssumptionBParams&, const AssumptionBParams&) = default;
};

struct AssumptionReport {
  bool b0 = false;          // h_1 = 1 and all h_k in [0, 1]
  bool b1 = false;          // ||h'|| >= rho1 log^2(eps^-2) max_k h_k (2 pi k)
  bool b2 = false;          // eps^2 sum h_k (2 pi k)^4 <= C1
  double h_prime_norm = 0;  // ||h'||
  double b1_rhs = 0;
  double b2_lhs = 0;
  double c_ratio = 0;       // [sum (1-h)(2pi k)^2 f^2]^2 / sum (1-h)^2 (2pi k)^2 f^2
};

/// Finite-eps checks on the weight sequence. The last assumption is
/// asymptotic in eps, so only its ratio is reported (0/0 is taken as 0).
inline AssumptionReport check_assumptions(const WeightSequence& h, double eps,
                                          const AssumptionBParams& p, const SignalSpectrum& f) {
  if (!(eps > 0.0)) throw InvalidInput("check_assumptions: eps must be > 0");
  AssumptionReport r;
  r.b0 = h.at(1) == 1.0;
  double hp2 = 0.0;
  double max_term = 0.0;
  double b2 = 0.0;
  for (int k = 1; k <= h.support(); ++k) {
    const double hk = h.at(k);
    if (hk < 0.0 || hk > 1.0) r.b0 = false;
    hp2 += hk * hk * freq_sq(k);
    max_term = std::max(max_term, hk * kTwoPi * k);
    b2 += hk * freq_sq(k) * freq_sq(k);
  }
  const double lg = std::log(1.0 / (eps * eps));
  r.h_prime_norm = std::sqrt(hp2);
  r.b1_rhs = p.rho1 * lg * lg * max_term;
  r.b1 = r.h_prime_norm >= r.b1_rhs;
  r.b2_lhs = eps * eps * b2;
  r.b2 = r.b2_lhs <= p.c1;

  double lin = 0.0;
  double quad = 0.0;
  const int K = std::max(h.support(), f.support());
  for (int k = 1; k <= K; ++k) {
    const double g = 1.0 - h.at(k);
    const double e = freq_sq(k) * f.coeff(k) * f.coeff(k);
    lin += g * e;
    quad += g * g * e;
  }
  r.c_ratio = quad == 0.0 ? 0.0 : lin * lin / quad;
  return r;
}

/// Declarative weight choice, instantiated per noise level.
struct WeightRecipe {
  WeightKind kind = WeightKind::Corrected;
  int N = 0;                     // projection
  std::optional<double> gamma;   // corrected; default 1/log(eps^-2)
  std::vector<double> values;    // custom

  friend bool operator==(const WeightRecipe&, const WeightRecipe&) = default;
};

/// Builds the weights described by `recipe` at noise level eps, with support
/// at least `min_support`.
inline WeightSequence build_weights(const WeightRecipe& recipe, const SobolevBall& ball,
                                    double eps, int min_support, double tol = 1e-10) {
  switch (recipe.kind) {
    case WeightKind::Projection:
      return projection_weights(recipe.N, std::max(recipe.N, min_support));
    case WeightKind::Custom: {
      std::vector<double> v = recipe.values;
      if (static_cast<int>(v.size()) < min_support) v.resize(static_cast<std::size_t>(min_support), 0.0);
      return custom_weights(std::move(v));
    }
    case WeightKind::Pinsker:
    case WeightKind::Corrected: {
      const double W = solve_bandwidth(ball, eps, tol).W;
      const int K = std::max(detail::required_support(W), min_support);
      if (recipe.kind == WeightKind::Pinsker) return pinsker_weights(ball, W, K);
      return corrected_weights(ball, W, recipe.gamma.value_or(default_gamma(eps)), K);
    }
  }
  throw InvalidInput("build_weights: unknown weight kind");
}

}  // namespace shiftlab

#endif
