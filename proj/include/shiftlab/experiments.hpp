#ifndef SHIFTLAB_EXPERIMENTS_HPP
#define SHIFTLAB_EXPERIMENTS_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "estimators.hpp"
#include "rng.hpp"
#include "signal_model.hpp"
#include "weights.hpp"

namespace shiftlab {

// Substream ids inside one replication.
inline constexpr std::uint32_t kNoiseStream = 0;
inline constexpr std::uint32_t kPriorStream = 1;

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs body(i) for i in [0, n) on `threads` workers. Work is handed out in
/// fixed-size chunks; results must be written to per-index slots, so the
/// outcome does not depend on the thread count. The first exception thrown
/// by any worker is rethrown after all workers stop.
template <class Body>
void parallel_for(std::size_t n, int threads, Body&& body) {
  const int workers = std::max(1, std::min<int>(resolve_threads(threads), static_cast<int>((n + 63) / 64)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  constexpr std::size_t kChunk = 64;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t start = next.fetch_add(kChunk);
      if (start >= n) return;
      const std::size_t stop = std::min(n, start + kChunk);
      try {
        for (std::size_t i = start; i < stop; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        failed = true;
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct SampleStats {
  double mean = 0.0;
  double std_err = 0.0;
};

/// Mean and standard error, accumulated in index order.
inline SampleStats sample_stats(const std::vector<double>& xs) {
  SampleStats s;
  const auto n = static_cast<double>(xs.size());
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / n;
  if (xs.size() < 2) return s;
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.std_err = std::sqrt(ss / (n - 1.0) / n);
  return s;
}

struct McOptions {
  ParamDomain domain{0.2};
  SearchOptions search{};
  int threads = 1;
};

/// Monte Carlo estimate of the normalized risk E[(theta_hat - theta)^2 I].
struct RiskReport {
  std::string estimator;
  double eps = 0.0;
  double theta = 0.0;
  double mean_sq_normalized = 0.0;
  double std_err = 0.0;
  int reps = 0;
  int degenerate_count = 0;
  std::uint64_t seed = 0;
};

/// Per-replication normalized losses of several estimators evaluated on the
/// same simulated observations (common random numbers).
struct PairedRun {
  std::vector<RiskReport> reports;
  std::vector<std::vector<double>> losses;      // [estimator][replication]
  std::vector<std::vector<double>> estimates;   // [estimator][replication]
  std::vector<std::vector<char>> degenerate;    // [estimator][replication]
};

inline PairedRun mc_risk_paired(const std::vector<EstimatorSpec>& specs, const SignalSpectrum& f,
                                double theta, double eps, int K, int reps, std::uint64_t seed,
                                const McOptions& opts = {}) {
  if (specs.empty()) throw InvalidInput("mc_risk: no estimators given");
  if (reps < 100) throw InvalidInput("mc_risk: reps must be >= 100");
  const ModelKind kind = required_model(specs.front());
  for (const auto& s : specs) {
    if (required_model(s) != kind) {
      throw InvalidInput("mc_risk: paired estimators must share the observation model");
    }
  }
  // Zero-noise runs are normalized by the noise-free limit 1 (I is infinite).
  const double info = eps > 0.0 ? fisher_info(f, eps) : 1.0;
  const std::size_t m = specs.size();
  const auto n = static_cast<std::size_t>(reps);
  PairedRun run;
  run.losses.assign(m, std::vector<double>(n));
  run.estimates.assign(m, std::vector<double>(n));
  run.degenerate.assign(m, std::vector<char>(n, 0));
  parallel_for(n, opts.threads, [&](std::size_t r) {
    RandomStream rng(seed, r, kNoiseStream);
    const SequenceObservation obs = simulate(f, theta, eps, K, kind, rng);
    for (std::size_t e = 0; e < m; ++e) {
      const Estimate est = try_estimate(specs[e], obs, opts.domain, opts.search);
      const double err = est.value - theta;
      run.losses[e][r] = err * err * info;
      run.estimates[e][r] = est.value;
      run.degenerate[e][r] = est.degenerate ? 1 : 0;
    }
  });
  for (std::size_t e = 0; e < m; ++e) {
    const SampleStats st = sample_stats(run.losses[e]);
    RiskReport rep;
    rep.estimator = estimator_name(specs[e]);
    rep.eps = eps;
    rep.theta = theta;
    rep.mean_sq_normalized = st.mean;
    rep.std_err = st.std_err;
    rep.reps = reps;
    rep.degenerate_count = static_cast<int>(std::count(run.degenerate[e].begin(), run.degenerate[e].end(), 1));
    rep.seed = seed;
    run.reports.push_back(std::move(rep));
  }
  return run;
}

inline RiskReport mc_risk(const EstimatorSpec& spec, const SignalSpectrum& f, double theta, double eps,
                          int K, int reps, std::uint64_t seed, const McOptions& opts = {}) {
  return mc_risk_paired({spec}, f, theta, eps, K, reps, seed, opts).reports.front();
}

/// Mean and standard error of loss(a) - loss(b) over paired replications.
inline SampleStats paired_difference(const PairedRun& run, std::size_t a, std::size_t b) {
  std::vector<double> d(run.losses.at(a).size());
  for (std::size_t r = 0; r < d.size(); ++r) d[r] = run.losses[a][r] - run.losses[b][r];
  return sample_stats(d);
}

struct Theorem1Row {
  double eps = 0.0;
  double mc_risk = 0.0;
  double predicted = 0.0;     // 1 + R[f,h] / ||f'||^2
  double excess_ratio = 0.0;  // (mc - 1) / (predicted - 1)
  double std_err = 0.0;
  double W = 0.0;
  int degenerate_count = 0;
};

/// Risk of the contrast maximizer against its second-order prediction, one
/// row per noise level. Weights are rebuilt from `recipe` at each eps.
inline std::vector<Theorem1Row> verify_theorem1(const SignalSpectrum& f, const WeightRecipe& recipe,
                                                const SobolevBall& ball, double theta,
                                                const std::vector<double>& eps_list, int K, int reps,
                                                std::uint64_t seed, const McOptions& opts = {}) {
  std::vector<Theorem1Row> rows;
  const double n1 = norms(f).n1;
  if (!(n1 > 0.0)) throw InvalidInput("verify_theorem1: ||f'|| must be > 0");
  for (double eps : eps_list) {
    const WeightSequence h = build_weights(recipe, ball, eps, 1);
    const int trunc = std::max({K, f.support(), h.support()});
    const RiskReport rep = mc_risk(AdaptiveContrast{h}, f, theta, eps, trunc, reps, seed, opts);
    Theorem1Row row;
    row.eps = eps;
    row.mc_risk = rep.mean_sq_normalized;
    row.std_err = rep.std_err;
    row.predicted = 1.0 + risk_functional(f, h, eps) / n1;
    row.excess_ratio = (row.mc_risk - 1.0) / (row.predicted - 1.0);
    row.W = h.W;
    row.degenerate_count = rep.degenerate_count;
    rows.push_back(row);
  }
  return rows;
}

/// Density on the shift parameter: a point mass, or
/// pi(x) = cos^2(pi x / (2 tau0)) / tau0 on [-tau0, tau0], which vanishes at
/// the endpoints and has Fisher information (pi / tau0)^2.
struct ThetaPrior {
  enum class Kind { PointMass, CosineSquared } kind = Kind::CosineSquared;
  double theta = 0.0;  // PointMass
  double tau0 = 0.2;   // CosineSquared

  static ThetaPrior point_mass(double t) { return {Kind::PointMass, t, 0.2}; }
  static ThetaPrior cosine_squared(double t0) {
    ParamDomain check(t0);
    return {Kind::CosineSquared, 0.0, check.tau0};
  }

  double density(double x) const {
    if (std::abs(x) > tau0) return 0.0;
    const double c = std::cos(std::numbers::pi * x / (2.0 * tau0));
    return c * c / tau0;
  }

  double cdf(double x) const {
    if (x <= -tau0) return 0.0;
    if (x >= tau0) return 1.0;
    return (x + tau0) / (2.0 * tau0) + std::sin(std::numbers::pi * x / tau0) / (2.0 * std::numbers::pi);
  }

  /// Inverse CDF by bisection on the monotone closed-form CDF.
  double quantile(double u) const {
    double lo = -tau0;
    double hi = tau0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * tau0; ++it) {
      const double mid = 0.5 * (lo + hi);
      (cdf(mid) < u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  double fisher_info() const {
    if (kind == Kind::PointMass) throw InvalidInput("point-mass theta prior has infinite Fisher information");
    return (std::numbers::pi / tau0) * (std::numbers::pi / tau0);
  }

  friend bool operator==(const ThetaPrior&, const ThetaPrior&) = default;
};

/// Independent Gaussian prior f_k ~ N(fbar_k, sigma2_k) on the signal and a
/// density on the shift.
struct PriorSpec {
  SignalSpectrum fbar{{0.0}};
  std::vector<double> sigma2;
  ThetaPrior theta_prior;

  PriorSpec(SignalSpectrum mean, std::vector<double> variances, ThetaPrior tp)
      : fbar(std::move(mean)), sigma2(std::move(variances)), theta_prior(tp) {
    for (double v : sigma2) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidInput("prior: variances must be finite and >= 0");
    }
  }

  int support() const { return std::max(fbar.support(), static_cast<int>(sigma2.size())); }

  double variance(int k) const {
    return (k >= 1 && k <= static_cast<int>(sigma2.size())) ? sigma2[static_cast<std::size_t>(k - 1)] : 0.0;
  }

  friend bool operator==(const PriorSpec&, const PriorSpec&) = default;
};

/// Prior whose variances are zero on the head k <= floor(gamma W) and
/// (1 - gamma) s_k^2 beyond, with s_k^2 the saddle variances of the Pinsker
/// weights at this eps.
inline PriorSpec truncated_saddle_prior(const SignalSpectrum& fbar, const SobolevBall& ball, double eps,
                                        std::optional<double> gamma, double tau0) {
  const double W = solve_bandwidth(ball, eps).W;
  const double g = gamma.value_or(default_gamma(eps));
  const WeightSequence q = pinsker_weights(ball, W, detail::required_support(W));
  return PriorSpec(fbar, prior_variances(q, eps, PriorVarianceMode::truncated(g, W)),
                   ThetaPrior::cosine_squared(tau0));
}

/// Vicinity radius with delta^2 = eps^2 W gamma^{2 - 2 beta}.
inline double vicinity_radius(double eps, double W, double gamma, double beta) {
  return std::sqrt(eps * eps * W * std::pow(gamma, 2.0 - 2.0 * beta));
}

struct PriorDraw {
  SignalSpectrum f;
  double theta = 0.0;
};

/// One draw of (f, theta). Coefficient k uses the keyed normal at index k;
/// theta uses the keyed uniform at index 0. sigma_k = 0 returns fbar_k exactly.
inline PriorDraw sample_prior(const PriorSpec& prior, RandomStream& rng) {
  const int K = prior.support();
  std::vector<double> c(static_cast<std::size_t>(K));
  for (int k = 1; k <= K; ++k) {
    const double s2 = prior.variance(k);
    double v = prior.fbar.coeff(k);
    if (s2 > 0.0) v += std::sqrt(s2) * rng.normal_pair(static_cast<std::uint64_t>(k))[0];
    c[static_cast<std::size_t>(k - 1)] = v;
  }
  double theta = prior.theta_prior.theta;
  if (prior.theta_prior.kind == ThetaPrior::Kind::CosineSquared) {
    theta = prior.theta_prior.quantile(rng.uniform(0));
  }
  return {SignalSpectrum(std::move(c)), theta};
}

/// Fraction of prior draws falling outside the vicinity of fbar.
inline double membership_rate(const PriorSpec& prior, double delta, const SobolevBall& ball, int reps,
                              std::uint64_t seed, int threads = 1) {
  if (reps < 1000) throw InvalidInput("membership_rate: reps must be >= 1000");
  std::vector<char> outside(static_cast<std::size_t>(reps), 0);
  parallel_for(outside.size(), threads, [&](std::size_t r) {
    RandomStream rng(seed, r, kPriorStream);
    const PriorDraw d = sample_prior(prior, rng);
    outside[r] = check_vicinity(d.f, prior.fbar, delta, ball) ? 0 : 1;
  });
  return static_cast<double>(std::count(outside.begin(), outside.end(), 1)) / reps;
}

/// Fisher information about theta carried by the pair (x_k, x*_k) when
/// f_k ~ N(fbar_k, sigma2_k): eps^-2 (fbar^2 + sigma^4 / (eps^2 + sigma^2)) (2 pi k)^2.
inline double block_fisher_info(double fbar_k, double sigma2_k, double eps, int k) {
  if (!(eps > 0.0)) throw InvalidInput("block_fisher_info: eps must be > 0");
  if (!(sigma2_k >= 0.0)) throw InvalidInput("block_fisher_info: sigma2 must be >= 0");
  const double e2 = eps * eps;
  return (fbar_k * fbar_k + sigma2_k * sigma2_k / (e2 + sigma2_k)) * freq_sq(k) / e2;
}

struct VanTreesBound {
  double bound_raw = 0.0;       // I_bar / (J + I_pi)
  double bound_expanded = 0.0;  // 1 + (sum (2 pi k)^2 lambda_k - I_pi) / I_bar
  double i_bar = 0.0;           // prior-averaged Fisher information
  double j_total = 0.0;         // sum of block informations
  double i_pi = 0.0;
  double shrinkage_sum = 0.0;   // sum (2 pi k)^2 lambda_k
};

inline VanTreesBound van_trees_bound(const PriorSpec& prior, double eps) {
  if (!(eps > 0.0)) throw InvalidInput("van_trees_bound: eps must be > 0");
  if (prior.theta_prior.kind != ThetaPrior::Kind::CosineSquared) {
    throw InvalidInput("van_trees_bound: needs a smooth theta prior (point mass has infinite information)");
  }
  VanTreesBound b;
  b.i_pi = prior.theta_prior.fisher_info();
  const double e2 = eps * eps;
  double i_bar = 0.0;
  for (int k = 1; k <= prior.support(); ++k) {
    const double fb = prior.fbar.coeff(k);
    const double s2 = prior.variance(k);
    b.j_total += block_fisher_info(fb, s2, eps, k);
    i_bar += freq_sq(k) * (fb * fb + s2);
    b.shrinkage_sum += freq_sq(k) * shrinkage_from_variance(s2, eps);
  }
  b.i_bar = i_bar / e2;
  b.bound_raw = b.i_bar / (b.j_total + b.i_pi);
  b.bound_expanded = 1.0 + (b.shrinkage_sum - b.i_pi) / b.i_bar;
  return b;
}

struct BayesReport {
  std::string estimator;
  double eps = 0.0;
  double risk = 0.0;              // E[(theta_hat - theta)^2] * I_bar
  double std_err = 0.0;
  double risk_random_info = 0.0;  // E[(theta_hat - theta)^2 I(f)]
  double std_err_random_info = 0.0;
  double bound_raw = 0.0;
  double bound_expanded = 0.0;
  int reps = 0;
  int degenerate_count = 0;
  std::uint64_t seed = 0;
};

/// Bayes risk of each estimator in the full Bayes model: every replication
/// draws (f, theta) from the prior, then one observation shared by all
/// estimators.
inline std::vector<BayesReport> bayes_risk_experiment(const std::vector<EstimatorSpec>& specs,
                                                      const PriorSpec& prior, double eps, int K, int reps,
                                                      std::uint64_t seed, const McOptions& opts = {}) {
  if (reps < 100) throw InvalidInput("bayes_risk_experiment: reps must be >= 100");
  for (const auto& s : specs) {
    if (required_model(s) != ModelKind::Full) {
      throw InvalidInput("bayes_risk_experiment: " + estimator_name(s) + " needs the local model");
    }
    if (std::holds_alternative<LinearizedOracle>(s)) {
      throw InvalidInput("bayes_risk_experiment: linearized_oracle reads the true shift");
    }
  }
  const VanTreesBound vt = van_trees_bound(prior, eps);
  const int trunc = std::max(K, prior.support());
  const std::size_t m = specs.size();
  const auto n = static_cast<std::size_t>(reps);
  std::vector<std::vector<double>> loss_bar(m, std::vector<double>(n));
  std::vector<std::vector<double>> loss_rand(m, std::vector<double>(n));
  std::vector<std::vector<char>> degenerate(m, std::vector<char>(n, 0));
  parallel_for(n, opts.threads, [&](std::size_t r) {
    RandomStream prior_rng(seed, r, kPriorStream);
    const PriorDraw d = sample_prior(prior, prior_rng);
    RandomStream noise(seed, r, kNoiseStream);
    const SequenceObservation obs = simulate(d.f, d.theta, eps, trunc, ModelKind::Full, noise);
    const double info = norms(d.f).n1 / (eps * eps);
    for (std::size_t e = 0; e < m; ++e) {
      const Estimate est = try_estimate(specs[e], obs, opts.domain, opts.search);
      const double err2 = (est.value - d.theta) * (est.value - d.theta);
      loss_bar[e][r] = err2 * vt.i_bar;
      loss_rand[e][r] = err2 * info;
      degenerate[e][r] = est.degenerate ? 1 : 0;
    }
  });
  std::vector<BayesReport> out;
  for (std::size_t e = 0; e < m; ++e) {
    const SampleStats a = sample_stats(loss_bar[e]);
    const SampleStats b = sample_stats(loss_rand[e]);
    BayesReport rep;
    rep.estimator = estimator_name(specs[e]);
    rep.eps = eps;
    rep.risk = a.mean;
    rep.std_err = a.std_err;
    rep.risk_random_info = b.mean;
    rep.std_err_random_info = b.std_err;
    rep.bound_raw = vt.bound_raw;
    rep.bound_expanded = vt.bound_expanded;
    rep.reps = reps;
    rep.degenerate_count = static_cast<int>(std::count(degenerate[e].begin(), degenerate[e].end(), 1));
    rep.seed = seed;
    out.push_back(std::move(rep));
  }
  return out;
}

/// Relative MISE of the linear derivative estimator over replications, with
/// the integral over u evaluated by the equispaced rule on `quad_points`
/// nodes (exact for the trigonometric polynomials involved once
/// quad_points > 2 K).
inline SampleStats derivative_mise_mc(const SignalSpectrum& f, const WeightSequence& h, double theta,
                                      double eps, int K, int reps, std::uint64_t seed, int quad_points,
                                      int threads = 1) {
  const double n1 = norms(f).n1;
  if (!(n1 > 0.0)) throw DegenerateEstimate("derivative_mise_mc: ||f'|| = 0", 0.0);
  const int trunc = std::max({K, f.support(), h.support()});
  if (quad_points <= 2 * trunc) throw InvalidInput("derivative_mise_mc: quad_points must exceed 2 K");
  std::vector<double> rel(static_cast<std::size_t>(reps));
  parallel_for(rel.size(), threads, [&](std::size_t r) {
    RandomStream rng(seed, r, kNoiseStream);
    const SequenceObservation obs = simulate(f, theta, eps, trunc, ModelKind::Full, rng);
    double acc = 0.0;
    for (int j = 0; j < quad_points; ++j) {
      const double u = -0.5 + static_cast<double>(j) / quad_points;
      const double d = derivative_estimate(obs, h, theta, u) - signal_derivative(f, u);
      acc += d * d;
    }
    rel[r] = acc / quad_points / n1;
  });
  return sample_stats(rel);
}

}  // namespace shiftlab

#endif
