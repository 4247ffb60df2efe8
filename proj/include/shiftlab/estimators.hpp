#ifndef SHIFTLAB_ESTIMATORS_HPP
#define SHIFTLAB_ESTIMATORS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "signal_model.hpp"
#include "weights.hpp"

namespace shiftlab {

// Estimator specifications. Kinds that read the true signal or the true shift
// are oracles; see `is_oracle`.

/// Maximum likelihood with the signal known.
struct OracleML {
  SignalSpectrum f;
};
/// Argmax of the weighted contrast sum_k h_k y_k(tau)^2.
struct AdaptiveContrast {
  WeightSequence h;
};
/// Contrast first-order condition linearized around tau = 0.
struct LinearizedFull {
  WeightSequence h;
};
/// Local model, signal known: least squares on X*_k.
struct LocalKnown {
  SignalSpectrum f;
};
/// Local model, plug-in h_k X_k for f_k everywhere.
struct LocalNaive {
  WeightSequence h;
};
/// Local model, bias-corrected denominator h_k (X_k^2 - eps^2).
struct LocalCorrected {
  WeightSequence h;
};
/// Root of the contrast derivative linearized at the true shift.
struct LinearizedOracle {
  WeightSequence h;
  SignalSpectrum f;
};

using EstimatorSpec = std::variant<OracleML, AdaptiveContrast, LinearizedFull, LocalKnown,
                                   LocalNaive, LocalCorrected, LinearizedOracle>;

inline std::string estimator_name(const EstimatorSpec& spec) {
  static constexpr const char* names[] = {"oracle_ml",  "adaptive_contrast", "linearized_full",
                                          "local_known", "local_naive",       "local_corrected",
                                          "linearized_oracle"};
  return names[spec.index()];
}

/// Name plus the weight kind for weighted estimators, e.g.
/// "adaptive_contrast[pinsker]".
inline std::string estimator_label(const EstimatorSpec& spec) {
  std::string label = estimator_name(spec);
  std::visit(
      [&](const auto& s) {
        if constexpr (requires { s.h; }) label += std::string("[") + to_string(s.h.kind) + "]";
      },
      spec);
  return label;
}

inline bool is_oracle(const EstimatorSpec& spec) {
  return std::holds_alternative<OracleML>(spec) || std::holds_alternative<LocalKnown>(spec) ||
         std::holds_alternative<LinearizedOracle>(spec);
}

inline ModelKind required_model(const EstimatorSpec& spec) {
  return (std::holds_alternative<LocalKnown>(spec) || std::holds_alternative<LocalNaive>(spec) ||
          std::holds_alternative<LocalCorrected>(spec))
             ? ModelKind::Local
             : ModelKind::Full;
}

struct SearchOptions {
  int grid_points = 0;  // 0 selects max(1024, 16 * K_h)
  double refine_tol = 1e-10;
  int refine_max_iter = 200;

  int resolved_grid(int k_max) const { return grid_points > 0 ? grid_points : std::max(1024, 16 * k_max); }

  friend bool operator==(const SearchOptions&, const SearchOptions&) = default;
};

namespace detail {

inline void require_full(const SequenceObservation& obs, const char* who) {
  if (obs.kind != ModelKind::Full) throw InvalidInput(std::string(who) + ": needs a full-model observation");
}

inline void require_local(const SequenceObservation& obs, const char* who) {
  if (obs.kind != ModelKind::Local) throw InvalidInput(std::string(who) + ": needs a local-model observation");
}

// Number of coefficients that carry weight, checked against the truncation.
inline int active_terms(const SequenceObservation& obs, int support, const char* who) {
  if (support > obs.truncation()) {
    throw InvalidInput(std::string(who) + ": weights extend beyond the observation truncation");
  }
  return support;
}

/// Trigonometric objective in tau built from a full observation:
///   squared: sum_k w_k y_k(tau)^2      linear: sum_k w_k y_k(tau)
/// where y_k(tau) = a_k cos(2 pi k tau) + b_k sin(2 pi k tau).
class TrigObjective {
 public:
  TrigObjective(const SequenceObservation& obs, std::vector<double> w, bool squared)
      : obs_(obs), w_(std::move(w)), squared_(squared) {}

  int order() const noexcept { return static_cast<int>(w_.size()); }

  double value(double tau) const {
    double s = 0.0;
    for (int k = 1; k <= order(); ++k) {
      const double wk = w_[static_cast<std::size_t>(k - 1)];
      if (wk == 0.0) continue;
      const ObsPair& p = obs_.at(k);
      const double y = p.a * std::cos(kTwoPi * k * tau) + p.b * std::sin(kTwoPi * k * tau);
      s += squared_ ? wk * y * y : wk * y;
    }
    return s;
  }

  double derivative(double tau) const {
    double s = 0.0;
    for (int k = 1; k <= order(); ++k) {
      const double wk = w_[static_cast<std::size_t>(k - 1)];
      if (wk == 0.0) continue;
      const ObsPair& p = obs_.at(k);
      if (squared_) {
        const double c = std::cos(2.0 * kTwoPi * k * tau);
        const double sn = std::sin(2.0 * kTwoPi * k * tau);
        s += wk * k * (2.0 * p.a * p.b * c - (p.a * p.a - p.b * p.b) * sn);
      } else {
        const double c = std::cos(kTwoPi * k * tau);
        const double sn = std::sin(kTwoPi * k * tau);
        s += wk * k * (p.b * c - p.a * sn);
      }
    }
    return kTwoPi * s;
  }

  /// Values on an equispaced grid; cos/sin of the harmonics come from the
  /// angle-addition recurrence, so each grid point costs two libm calls.
  void grid_values(double lo, double step, int n, std::vector<double>& out) const {
    out.resize(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      const double tau = lo + step * j;
      const double c1 = std::cos(kTwoPi * tau);
      const double s1 = std::sin(kTwoPi * tau);
      double ck = c1;
      double sk = s1;
      double acc = 0.0;
      for (int k = 1; k <= order(); ++k) {
        const double wk = w_[static_cast<std::size_t>(k - 1)];
        if (wk != 0.0) {
          const ObsPair& p = obs_.at(k);
          const double y = p.a * ck + p.b * sk;
          acc += squared_ ? wk * y * y : wk * y;
        }
        const double cn = ck * c1 - sk * s1;
        sk = sk * c1 + ck * s1;
        ck = cn;
      }
      out[static_cast<std::size_t>(j)] = acc;
    }
  }

 private:
  const SequenceObservation& obs_;
  std::vector<double> w_;
  bool squared_;
};

inline double golden_section_max(const TrigObjective& obj, double lo, double hi, double tol,
                                 int max_iter) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = obj.value(x1);
  double f2 = obj.value(x2);
  for (int it = 0; it < max_iter && (hi - lo) > tol; ++it) {
    if (f1 >= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = obj.value(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = obj.value(x2);
    }
  }
  return 0.5 * (lo + hi);
}

/// Global maximum of a trigonometric objective over [-tau0, tau0]: exhaustive
/// grid, then refinement inside the cell pair around the best grid point.
/// Refinement bisects on the derivative when it changes sign across the cell
/// (root located to rounding) and falls back to golden section otherwise.
/// Ties on the grid go to the smallest tau.
inline double maximize(const TrigObjective& obj, const ParamDomain& domain, const SearchOptions& opts) {
  const int n = std::max(3, opts.resolved_grid(obj.order()));
  const double lo_dom = -domain.tau0;
  const double step = 2.0 * domain.tau0 / (n - 1);
  std::vector<double> vals;
  obj.grid_values(lo_dom, step, n, vals);
  int best = 0;
  for (int j = 1; j < n; ++j) {
    if (vals[static_cast<std::size_t>(j)] > vals[static_cast<std::size_t>(best)]) best = j;
  }
  const double grid_tau = best == n - 1 ? domain.tau0 : lo_dom + step * best;
  double lo = best == 0 ? lo_dom : lo_dom + step * (best - 1);
  double hi = best >= n - 2 ? domain.tau0 : lo_dom + step * (best + 1);

  double candidate;
  const double dlo = obj.derivative(lo);
  const double dhi = obj.derivative(hi);
  if (dlo > 0.0 && dhi < 0.0) {
    for (int it = 0; it < opts.refine_max_iter && (hi - lo) > opts.refine_tol; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double dm = obj.derivative(mid);
      if (dm == 0.0) {
        lo = hi = mid;
        break;
      }
      (dm > 0.0 ? lo : hi) = mid;
    }
    candidate = 0.5 * (lo + hi);
  } else {
    candidate = golden_section_max(obj, lo, hi, opts.refine_tol, opts.refine_max_iter);
  }
  const double best_tau = obj.value(candidate) >= obj.value(grid_tau) ? candidate : grid_tau;
  return domain.clamp(best_tau);
}

inline std::vector<double> weight_vector(const WeightSequence& h, int terms) {
  return std::vector<double>(h.values.begin(), h.values.begin() + terms);
}

}  // namespace detail

/// Contrast L(tau) = sum_k h_k (a_k cos(2 pi k tau) + b_k sin(2 pi k tau))^2.
inline double contrast(const SequenceObservation& obs, const WeightSequence& h, double tau) {
  detail::require_full(obs, "contrast");
  const int K = detail::active_terms(obs, h.effective_support(), "contrast");
  return detail::TrigObjective(obs, detail::weight_vector(h, K), true).value(tau);
}

/// dL/dtau = 2 pi sum_k h_k k {2 a_k b_k cos(4 pi k tau) - (a_k^2 - b_k^2) sin(4 pi k tau)}.
inline double contrast_derivative(const SequenceObservation& obs, const WeightSequence& h, double tau) {
  detail::require_full(obs, "contrast_derivative");
  const int K = detail::active_terms(obs, h.effective_support(), "contrast_derivative");
  return detail::TrigObjective(obs, detail::weight_vector(h, K), true).derivative(tau);
}

/// tau_hat = theta + L0(theta) / E[L1(theta)], the oracle root of the
/// contrast derivative linearized at the true shift. Needs `theta_true`.
inline double linearized_oracle(const SequenceObservation& obs, const WeightSequence& h,
                                const SignalSpectrum& f) {
  detail::require_full(obs, "linearized_oracle");
  if (!obs.theta_true) throw InvalidInput("linearized_oracle: observation carries no theta_true");
  if (!(obs.eps > 0.0)) throw InvalidInput("linearized_oracle: eps must be > 0");
  const int K = detail::active_terms(obs, h.effective_support(), "linearized_oracle");
  const double theta = *obs.theta_true;
  const double eps = obs.eps;
  double l0 = 0.0;
  double el1 = 0.0;
  for (int k = 1; k <= K; ++k) {
    const double hk = h.at(k);
    if (hk == 0.0) continue;
    const double fk = f.coeff(k);
    const ObsPair& p = obs.at(k);
    const double c = std::cos(kTwoPi * k * theta);
    const double s = std::sin(kTwoPi * k * theta);
    const double xi = (p.a * c + p.b * s - fk) / eps;
    const double xi_star = (p.b * c - p.a * s) / eps;
    l0 += hk * kTwoPi * k * (eps * fk * xi_star + eps * eps * xi_star * xi);
    el1 += hk * freq_sq(k) * fk * fk;
  }
  if (!(el1 > 0.0)) throw DegenerateEstimate("linearized_oracle: E[L1] = 0", theta);
  return theta + l0 / el1;
}

/// Exact E[(tau_hat - theta)^2 I(f)]:
///   ||f'||^2 sum h_k^2 (2 pi k)^2 (f_k^2 + eps^2) / (sum h_k (2 pi k)^2 f_k^2)^2.
inline double closed_form_risk_linearized(const SignalSpectrum& f, const WeightSequence& h, double eps) {
  if (!(eps > 0.0)) throw InvalidInput("closed_form_risk_linearized: eps must be > 0");
  const int K = std::max(f.support(), h.support());
  double num = 0.0;
  double den = 0.0;
  for (int k = 1; k <= K; ++k) {
    const double hk = h.at(k);
    const double fk = f.coeff(k);
    num += hk * hk * freq_sq(k) * (fk * fk + eps * eps);
    den += hk * freq_sq(k) * fk * fk;
  }
  if (!(den > 0.0)) throw DegenerateEstimate("closed_form_risk_linearized: zero denominator", 0.0);
  return norms(f).n1 * num / (den * den);
}

/// Relative MISE R[f, h] / ||f'||^2 of the linear derivative estimator.
inline double derivative_mise(const SignalSpectrum& f, const WeightSequence& h, double eps) {
  const double n1 = norms(f).n1;
  if (!(n1 > 0.0)) throw DegenerateEstimate("derivative_mise: ||f'|| = 0", 0.0);
  return risk_functional(f, h, eps) / n1;
}

/// f'(u) = -sqrt(2) sum_k (2 pi k) f_k sin(2 pi k u).
inline double signal_derivative(const SignalSpectrum& f, double u) {
  double s = 0.0;
  for (int k = 1; k <= f.support(); ++k) s += kTwoPi * k * f.coeff(k) * std::sin(kTwoPi * k * u);
  return -std::numbers::sqrt2 * s;
}

/// Linear estimate of f'(u) from a full observation aligned at shift theta:
///   -sqrt(2) sum_k h_k (2 pi k) sin(2 pi k u) y_k(theta).
inline double derivative_estimate(const SequenceObservation& obs, const WeightSequence& h,
                                  double theta, double u) {
  detail::require_full(obs, "derivative_estimate");
  const int K = detail::active_terms(obs, h.effective_support(), "derivative_estimate");
  double s = 0.0;
  for (int k = 1; k <= K; ++k) {
    const double hk = h.at(k);
    if (hk == 0.0) continue;
    const ObsPair& p = obs.at(k);
    const double y = p.a * std::cos(kTwoPi * k * theta) + p.b * std::sin(kTwoPi * k * theta);
    s += hk * kTwoPi * k * std::sin(kTwoPi * k * u) * y;
  }
  return -std::numbers::sqrt2 * s;
}

/// Outcome of one estimator application. `degenerate` marks a ratio estimator
/// whose denominator was nonpositive; `value` is then `raw` clamped to the
/// domain (0 when `raw` is NaN).
struct Estimate {
  double value = 0.0;
  double raw = 0.0;
  bool degenerate = false;
};

namespace detail {

inline Estimate ratio_estimate(double num, double den, const ParamDomain& domain) {
  const double raw = num / den;
  return {domain.clamp(raw), raw, !(den > 0.0)};
}

}  // namespace detail

/// Applies `spec` to `obs`. Degenerate ratio estimates are flagged rather
/// than thrown; see `estimate` for the throwing form.
inline Estimate try_estimate(const EstimatorSpec& spec, const SequenceObservation& obs,
                             const ParamDomain& domain, const SearchOptions& opts = {}) {
  return std::visit(
      [&](const auto& s) -> Estimate {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, AdaptiveContrast>) {
          detail::require_full(obs, "adaptive_contrast");
          const int K = detail::active_terms(obs, s.h.effective_support(), "adaptive_contrast");
          const detail::TrigObjective obj(obs, detail::weight_vector(s.h, K), true);
          const double t = detail::maximize(obj, domain, opts);
          return {t, t, false};
        } else if constexpr (std::is_same_v<S, OracleML>) {
          detail::require_full(obs, "oracle_ml");
          const int K = detail::active_terms(obs, s.f.support(), "oracle_ml");
          std::vector<double> w(s.f.coeffs().begin(), s.f.coeffs().begin() + K);
          const detail::TrigObjective obj(obs, std::move(w), false);
          const double t = detail::maximize(obj, domain, opts);
          return {t, t, false};
        } else if constexpr (std::is_same_v<S, LinearizedFull>) {
          detail::require_full(obs, "linearized_full");
          const int K = detail::active_terms(obs, s.h.effective_support(), "linearized_full");
          double num = 0.0, den = 0.0;
          for (int k = 1; k <= K; ++k) {
            const ObsPair& p = obs.at(k);
            num += kTwoPi * k * s.h.at(k) * p.a * p.b;
            den += freq_sq(k) * s.h.at(k) * (p.a * p.a - p.b * p.b);
          }
          return detail::ratio_estimate(num, den, domain);
        } else if constexpr (std::is_same_v<S, LocalKnown>) {
          detail::require_local(obs, "local_known");
          const int K = detail::active_terms(obs, s.f.support(), "local_known");
          double num = 0.0, den = 0.0;
          for (int k = 1; k <= K; ++k) {
            num += kTwoPi * k * s.f.coeff(k) * obs.at(k).b;
            den += freq_sq(k) * s.f.coeff(k) * s.f.coeff(k);
          }
          return detail::ratio_estimate(num, den, domain);
        } else if constexpr (std::is_same_v<S, LocalNaive>) {
          detail::require_local(obs, "local_naive");
          const int K = detail::active_terms(obs, s.h.effective_support(), "local_naive");
          double num = 0.0, den = 0.0;
          for (int k = 1; k <= K; ++k) {
            const ObsPair& p = obs.at(k);
            const double hk = s.h.at(k);
            num += kTwoPi * k * hk * p.a * p.b;
            den += freq_sq(k) * hk * hk * p.a * p.a;
          }
          return detail::ratio_estimate(num, den, domain);
        } else if constexpr (std::is_same_v<S, LocalCorrected>) {
          detail::require_local(obs, "local_corrected");
          const int K = detail::active_terms(obs, s.h.effective_support(), "local_corrected");
          const double e2 = obs.eps * obs.eps;
          double num = 0.0, den = 0.0;
          for (int k = 1; k <= K; ++k) {
            const ObsPair& p = obs.at(k);
            const double hk = s.h.at(k);
            num += kTwoPi * k * hk * p.a * p.b;
            den += freq_sq(k) * hk * (p.a * p.a - e2);
          }
          return detail::ratio_estimate(num, den, domain);
        } else {
          static_assert(std::is_same_v<S, LinearizedOracle>);
          // Diagnostic only: left unclamped so its risk is the exact closed form.
          const double t = linearized_oracle(obs, s.h, s.f);
          return {t, t, false};
        }
      },
      spec);
}

/// Throwing form of `try_estimate`: degenerate ratio estimates raise
/// DegenerateEstimate carrying the raw ratio.
inline double estimate(const EstimatorSpec& spec, const SequenceObservation& obs,
                       const ParamDomain& domain, const SearchOptions& opts = {}) {
  const Estimate e = try_estimate(spec, obs, domain, opts);
  if (e.degenerate) {
    throw DegenerateEstimate(estimator_name(spec) + ": nonpositive denominator", e.raw);
  }
  return e.value;
}

}  // namespace shiftlab

#endif
