#ifndef SHIFTLAB_SIGNAL_MODEL_HPP
#define SHIFTLAB_SIGNAL_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace shiftlab {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// (2*pi*k)^p, the frequency weight that appears in every Sobolev-type norm.
inline double freq_pow(int k, double p) { return std::pow(kTwoPi * k, p); }

inline double freq_sq(int k) {
  const double w = kTwoPi * k;
  return w * w;
}

inline bool all_finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

/// Cosine Fourier coefficients f_1..f_K of a symmetric 1-periodic signal
///   f(t) = sqrt(2) * sum_k f_k cos(2 pi k t).
/// Coefficients beyond `support()` are exactly zero. Trailing zeros passed to
/// the constructor are kept.
class SignalSpectrum {
 public:
  explicit SignalSpectrum(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) throw InvalidInput("signal: coefficient list is empty");
    if (!all_finite(coeffs_)) throw InvalidInput("signal: coefficients must be finite");
  }

  int support() const noexcept { return static_cast<int>(coeffs_.size()); }

  /// f_k for k >= 1; zero beyond the support.
  double coeff(int k) const noexcept {
    return (k >= 1 && k <= support()) ? coeffs_[static_cast<std::size_t>(k - 1)] : 0.0;
  }

  std::span<const double> coeffs() const noexcept { return coeffs_; }

  bool is_zero() const noexcept {
    for (double c : coeffs_) {
      if (c != 0.0) return false;
    }
    return true;
  }

  friend bool operator==(const SignalSpectrum&, const SignalSpectrum&) = default;

 private:
  std::vector<double> coeffs_;
};

inline SignalSpectrum make_signal(std::vector<double> coeffs) {
  return SignalSpectrum(std::move(coeffs));
}

/// Symmetric parameter set [-tau0, tau0]; identifiability needs tau0 < 1/4.
struct ParamDomain {
  double tau0 = 0.2;

  explicit ParamDomain(double t0 = 0.2) : tau0(t0) {
    if (!(t0 > 0.0 && t0 < 0.25)) {
      throw InvalidInput("tau0 = " + std::to_string(t0) +
                         " violates 0 < tau0 < 1/4 (shift is only identifiable on an "
                         "interval shorter than half a period)");
    }
  }

  bool contains(double theta) const noexcept { return std::abs(theta) <= tau0; }

  double clamp(double theta) const noexcept {
    if (std::isnan(theta)) return 0.0;
    return theta < -tau0 ? -tau0 : (theta > tau0 ? tau0 : theta);
  }

  friend bool operator==(const ParamDomain&, const ParamDomain&) = default;
};

/// Parameters (rho, C0) of the nuisance class: f_1^2 >= rho, ||f''||^2 <= C0.
struct ClassParams {
  double rho = 0.0;
  double c0 = 0.0;

  ClassParams(double r, double c) : rho(r), c0(c) {
    if (!(r > 0.0) || !(c > 0.0) || !std::isfinite(r) || !std::isfinite(c)) {
      throw InvalidInput("class params: rho and C0 must be positive");
    }
  }

  /// The class is empty when C0 < (2 pi)^2 rho.
  bool nonempty() const noexcept { return c0 >= freq_sq(1) * rho; }

  friend bool operator==(const ClassParams&, const ClassParams&) = default;
};

/// Sobolev ellipsoid sum_k (2 pi k)^{2 beta} f_k^2 <= L.
struct SobolevBall {
  double beta = 2.0;
  double L = 1.0;

  SobolevBall(double b, double l) : beta(b), L(l) {
    if (!(b > 1.0) || !std::isfinite(b)) throw InvalidInput("sobolev ball: beta must be > 1");
    if (!(l > 0.0) || !std::isfinite(l)) throw InvalidInput("sobolev ball: L must be > 0");
  }

  double norm_sq(std::span<const double> coeffs) const {
    double s = 0.0;
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      s += freq_pow(static_cast<int>(i) + 1, 2.0 * beta) * coeffs[i] * coeffs[i];
    }
    return s;
  }

  friend bool operator==(const SobolevBall&, const SobolevBall&) = default;
};

struct Norms {
  double n0 = 0.0;  // sum f_k^2
  double n1 = 0.0;  // ||f'||^2
  double n2 = 0.0;  // ||f''||^2
};

inline Norms norms(const SignalSpectrum& f) {
  Norms out;
  for (int k = 1; k <= f.support(); ++k) {
    const double c2 = f.coeff(k) * f.coeff(k);
    const double w2 = freq_sq(k);
    out.n0 += c2;
    out.n1 += w2 * c2;
    out.n2 += w2 * w2 * c2;
  }
  return out;
}

inline double eval_signal(const SignalSpectrum& f, double t) {
  if (!std::isfinite(t)) throw InvalidInput("eval_signal: t must be finite");
  // Reduce to [-1/2, 1/2) first so periodicity holds to rounding.
  const double u = t - std::floor(t + 0.5);
  double s = 0.0;
  for (int k = 1; k <= f.support(); ++k) s += f.coeff(k) * std::cos(kTwoPi * k * u);
  return std::numbers::sqrt2 * s;
}

/// Fisher information eps^{-2} ||f'||^2 about the shift when f is known.
inline double fisher_info(const SignalSpectrum& f, double eps) {
  if (!(eps > 0.0)) throw InvalidInput("fisher_info: eps must be > 0");
  return norms(f).n1 / (eps * eps);
}

inline bool check_class_F(const SignalSpectrum& f, const ClassParams& p) {
  return f.coeff(1) * f.coeff(1) >= p.rho && norms(f).n2 <= p.c0;
}

/// f lies in the vicinity {fbar + v : ||v|| <= delta, v in W(beta, L)}.
inline bool check_vicinity(const SignalSpectrum& f, const SignalSpectrum& fbar, double delta,
                           const SobolevBall& ball) {
  if (!(delta > 0.0)) throw InvalidInput("check_vicinity: delta must be > 0");
  const int K = std::max(f.support(), fbar.support());
  double l2 = 0.0;
  double sob = 0.0;
  for (int k = 1; k <= K; ++k) {
    const double v = f.coeff(k) - fbar.coeff(k);
    l2 += v * v;
    sob += freq_pow(k, 2.0 * ball.beta) * v * v;
  }
  return l2 <= delta * delta && sob <= ball.L;
}

/// Signal on the boundary of the Sobolev ball with coefficients decaying as
/// k^{-decay}; decay defaults to beta + 1.
inline SignalSpectrum sobolev_boundary_signal(const SobolevBall& ball, int support,
                                              std::optional<double> decay = std::nullopt) {
  if (support < 1) throw InvalidInput("sobolev_boundary_signal: support must be >= 1");
  const double p = decay.value_or(ball.beta + 1.0);
  std::vector<double> c(static_cast<std::size_t>(support));
  for (int k = 1; k <= support; ++k) c[static_cast<std::size_t>(k - 1)] = std::pow(k, -p);
  const double scale = std::sqrt(ball.L / ball.norm_sq(c));
  for (double& x : c) x *= scale;
  return SignalSpectrum(std::move(c));
}

enum class ModelKind { Full, Local };

inline const char* to_string(ModelKind k) { return k == ModelKind::Full ? "full" : "local"; }

struct ObsPair {
  double a = 0.0;  // x_k (full) or X_k (local)
  double b = 0.0;  // x*_k (full) or X*_k (local)

  friend bool operator==(const ObsPair&, const ObsPair&) = default;
};

/// Realized sequence-model data for k = 1..K.
///
/// `theta_true` is carried for oracle diagnostics only; feasible estimators
/// never read it.
struct SequenceObservation {
  ModelKind kind = ModelKind::Full;
  double eps = 0.0;
  std::vector<ObsPair> pairs;
  std::optional<double> theta_true;

  int truncation() const noexcept { return static_cast<int>(pairs.size()); }
  const ObsPair& at(int k) const { return pairs.at(static_cast<std::size_t>(k - 1)); }
};

/// Draws one observation of the full (rotated) or local (linearized) model.
/// Noise for coefficient k is the keyed pair `rng.normal_pair(k)`; with
/// eps == 0 no draws are made.
inline SequenceObservation simulate(const SignalSpectrum& f, double theta, double eps, int K,
                                    ModelKind kind, RandomStream& rng) {
  if (K < f.support()) throw InvalidInput("simulate: truncation K must be >= signal support");
  if (!std::isfinite(theta)) throw InvalidInput("simulate: theta must be finite");
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw InvalidInput("simulate: eps must be >= 0");
  if (kind == ModelKind::Full && std::abs(theta) > 0.25) {
    throw InvalidInput("simulate: |theta| must be <= 1/4 for the full model");
  }
  SequenceObservation obs;
  obs.kind = kind;
  obs.eps = eps;
  obs.theta_true = theta;
  obs.pairs.resize(static_cast<std::size_t>(K));
  for (int k = 1; k <= K; ++k) {
    const double fk = f.coeff(k);
    ObsPair& p = obs.pairs[static_cast<std::size_t>(k - 1)];
    if (kind == ModelKind::Full) {
      const double phase = kTwoPi * k * theta;
      p.a = fk * std::cos(phase);
      p.b = fk * std::sin(phase);
    } else {
      p.a = fk;
      p.b = theta * kTwoPi * k * fk;
    }
    if (eps > 0.0) {
      const auto xi = rng.normal_pair(static_cast<std::uint64_t>(k));
      p.a += eps * xi[0];
      p.b += eps * xi[1];
    }
  }
  return obs;
}

/// Re-expresses a full-model observation as if the shift were theta + delta.
inline SequenceObservation shift_observation(const SequenceObservation& obs, double delta) {
  if (obs.kind != ModelKind::Full) throw InvalidInput("shift_observation: needs a full-model observation");
  SequenceObservation out = obs;
  for (int k = 1; k <= obs.truncation(); ++k) {
    const double c = std::cos(kTwoPi * k * delta);
    const double s = std::sin(kTwoPi * k * delta);
    const ObsPair& p = obs.at(k);
    out.pairs[static_cast<std::size_t>(k - 1)] = {p.a * c - p.b * s, p.b * c + p.a * s};
  }
  if (out.theta_true) *out.theta_true += delta;
  return out;
}

}  // namespace shiftlab

#endif
