#ifndef SHIFTLAB_SELFTEST_HPP
#define SHIFTLAB_SELFTEST_HPP

// Acceptance suite: one check per exit criterion, each with its tolerance
// pinned here. Used by the acceptance test binary and `shift-lab selftest`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "csv.hpp"
#include "estimators.hpp"
#include "experiments.hpp"
#include "rng.hpp"
#include "signal_model.hpp"
#include "weights.hpp"

namespace shiftlab::selftest {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct Options {
  int threads = 1;
  std::uint64_t seed = 20240601;
  std::set<int> only;  // empty runs everything
};

// Canonical setup shared by several criteria.
inline SobolevBall canonical_ball() { return SobolevBall(2.0, 1.0); }
inline SignalSpectrum canonical_signal() { return sobolev_boundary_signal(canonical_ball(), 32); }
inline constexpr double kTau0 = 0.2;
inline constexpr double kTheta = 0.05;
inline constexpr int kTruncation = 32;

inline WeightSequence canonical_weights(double eps) {
  WeightRecipe r;
  r.kind = WeightKind::Corrected;
  return build_weights(r, canonical_ball(), eps, 1);
}

inline std::string fmt(double x) { return format_double(x); }

// Replication-level CSV used for the determinism criterion.
inline std::string paired_run_csv(const PairedRun& run, const std::vector<std::string>& names) {
  CsvTable t({"replication", "estimator", "estimate", "degenerate_flag"});
  for (std::size_t e = 0; e < names.size(); ++e) {
    for (std::size_t r = 0; r < run.estimates[e].size(); ++r) {
      t.add_row({static_cast<long long>(r), names[e], run.estimates[e][r],
                 static_cast<long long>(run.degenerate[e][r])});
    }
  }
  for (const RiskReport& rep : run.reports) {
    t.add_row({-1LL, rep.estimator + ":mean", rep.mean_sq_normalized, static_cast<long long>(rep.degenerate_count)});
    t.add_row({-1LL, rep.estimator + ":se", rep.std_err, static_cast<long long>(rep.reps)});
  }
  return t.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
  std::string csv;
};

// 1. Linearized oracle: MC risk equals the exact closed form.
inline Outcome criterion1(const Options& o, int threads) {
  const double eps = 0.05;
  const SignalSpectrum f = canonical_signal();
  const WeightSequence h = canonical_weights(eps);
  McOptions mc;
  mc.domain = ParamDomain(kTau0);
  mc.threads = threads;
  const PairedRun run = mc_risk_paired({LinearizedOracle{h, f}}, f, kTheta, eps, kTruncation, 100000, o.seed, mc);
  const RiskReport& rep = run.reports.front();
  const double exact = closed_form_risk_linearized(f, h, eps);
  const double z = std::abs(rep.mean_sq_normalized - exact) / rep.std_err;
  Outcome out;
  out.pass = z <= 3.0;
  out.detail = "mc=" + fmt(rep.mean_sq_normalized) + " se=" + fmt(rep.std_err) + " exact=" + fmt(exact) +
               " |z|=" + fmt(z) + " (<= 3)";
  out.csv = paired_run_csv(run, {"linearized_oracle"});
  return out;
}

// 2. Saddle point of the second-order risk functional.
inline Outcome criterion2(const Options& o) {
  const SobolevBall ball = canonical_ball();
  Outcome out;
  out.pass = true;
  std::ostringstream msg;
  for (double eps : {1e-2, 1e-3}) {
    const MinimaxValue mv = minimax_value(ball, eps);
    const int K = static_cast<int>(std::ceil(mv.W));
    const WeightSequence q = pinsker_weights(ball, mv.W, K);
    const std::vector<double> s = saddle_signal(q, eps);
    const double r_sq = risk_functional(s, q, eps);
    const double rel = std::abs(r_sq - mv.r_exact) / mv.r_exact;
    bool ok = rel <= 1e-10;
    double worst_f = -1e300;
    double worst_h = 1e300;
    RandomStream rng(o.seed, 0, 200);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> c(static_cast<std::size_t>(2 * K));
      for (double& x : c) x = rng.next_normal();
      const double scale = std::sqrt(ball.L / ball.norm_sq(c));
      for (double& x : c) x *= scale;
      worst_f = std::max(worst_f, (risk_functional(c, q, eps) - mv.r_exact) / mv.r_exact);

      std::vector<double> hv(static_cast<std::size_t>(2 * K));
      for (double& x : hv) x = rng.next_uniform();
      worst_h = std::min(worst_h, (risk_functional(s, custom_weights(hv), eps) - mv.r_exact) / mv.r_exact);
    }
    ok = ok && worst_f <= 1e-9 && worst_h >= -1e-9;
    out.pass = out.pass && ok;
    msg << "eps=" << fmt(eps) << ": rel|R[s,q]-r|=" << fmt(rel) << " max rel(R[f,q]-r)=" << fmt(worst_f)
        << " min rel(R[s,h]-r)=" << fmt(worst_h) << "; ";
  }
  out.detail = msg.str();
  return out;
}

// 3. Bandwidth equation residuals and agreement with the asymptotic formula.
inline Outcome criterion3(const Options&) {
  Outcome out;
  out.pass = true;
  double worst_resid = 0.0;
  for (double beta : {1.5, 2.0, 3.0}) {
    for (double L : {0.5, 1.0, 10.0}) {
      for (double eps : {0.1, 0.01, 0.001}) {
        const SobolevBall ball(beta, L);
        const BandwidthSolution bw = solve_bandwidth(ball, eps);
        const double resid = std::abs(bandwidth_constraint(ball, eps, bw.W) - L) / L;
        worst_resid = std::max(worst_resid, resid);
      }
    }
  }
  const SobolevBall ball(2.0, 1.0);
  const double ratio = solve_bandwidth(ball, 1e-4).W / bandwidth_asymptotic(ball, 1e-4);
  out.pass = worst_resid <= 1e-9 && ratio >= 0.9 && ratio <= 1.1;
  out.detail = "max |G(W)-L|/L over 27 cases=" + fmt(worst_resid) + " (<= 1e-9); W/W_asym at eps=1e-4: " +
               fmt(ratio) + " (in [0.9, 1.1])";
  return out;
}

// 4. Exact recovery without noise.
inline Outcome criterion4(const Options& o) {
  const ParamDomain domain(kTau0);
  const ClassParams cls(1e-4, 1e4);
  RandomStream rng(o.seed, 0, 400);
  double worst = 0.0;
  int checked = 0;
  bool all_in_class = true;
  for (int trial = 0; trial < 50; ++trial) {
    // Alternate between the canonical signal and random members of F.
    SignalSpectrum f = canonical_signal();
    if (trial % 2 == 1) {
      std::vector<double> c(8);
      c[0] = 0.5 + 0.5 * rng.next_uniform();
      for (std::size_t k = 1; k < c.size(); ++k) c[k] = rng.next_normal() * 0.3 / ((k + 1.0) * (k + 1.0) * (k + 1.0));
      f = SignalSpectrum(c);
    }
    all_in_class = all_in_class && check_class_F(f, cls);
    const WeightSequence h = projection_weights(f.support(), f.support());
    const double theta = -kTau0 + 2.0 * kTau0 * rng.next_uniform();
    RandomStream noise(o.seed, static_cast<std::uint64_t>(trial), kNoiseStream);
    const SequenceObservation obs = simulate(f, theta, 0.0, f.support(), ModelKind::Full, noise);
    const double est = estimate(AdaptiveContrast{h}, obs, domain);
    worst = std::max(worst, std::abs(est - theta));
    ++checked;
  }
  Outcome out;
  out.pass = all_in_class && worst <= 1e-8 && checked == 50;
  out.detail = "max |theta_hat - theta| over 50 draws = " + fmt(worst) + " (<= 1e-8)";
  return out;
}

// 5. Bias-corrected local estimator beats the naive plug-in (paired).
inline Outcome criterion5(const Options& o, int threads) {
  const double eps = 0.05;
  const SignalSpectrum f = canonical_signal();
  const WeightSequence h = canonical_weights(eps);
  McOptions mc;
  mc.domain = ParamDomain(kTau0);
  mc.threads = threads;
  const PairedRun run =
      mc_risk_paired({LocalNaive{h}, LocalCorrected{h}}, f, eps / 2.0, eps, kTruncation, 100000, o.seed, mc);
  const SampleStats d = paired_difference(run, 0, 1);
  Outcome out;
  out.pass = d.mean > 3.0 * d.std_err;
  out.detail = "risk(naive)=" + fmt(run.reports[0].mean_sq_normalized) +
               " risk(corrected)=" + fmt(run.reports[1].mean_sq_normalized) + " diff=" + fmt(d.mean) +
               " se(diff)=" + fmt(d.std_err) + " (diff > 3 se); degenerate naive/corrected=" +
               std::to_string(run.reports[0].degenerate_count) + "/" +
               std::to_string(run.reports[1].degenerate_count);
  out.csv = paired_run_csv(run, {"local_naive", "local_corrected"});
  return out;
}

// 6. Second-order expansion of the contrast maximizer's risk.
inline Outcome criterion6(const Options& o, int threads) {
  const SignalSpectrum f = canonical_signal();
  WeightRecipe recipe;
  recipe.kind = WeightKind::Corrected;
  McOptions mc;
  mc.domain = ParamDomain(kTau0);
  mc.threads = threads;
  const std::vector<Theorem1Row> rows =
      verify_theorem1(f, recipe, canonical_ball(), kTheta, {0.1, 0.05, 0.02}, kTruncation, 100000, o.seed, mc);
  Outcome out;
  bool above = true;
  std::ostringstream msg;
  for (const Theorem1Row& r : rows) {
    above = above && r.mc_risk > 1.0 - 3.0 * r.std_err;
    msg << "eps=" << fmt(r.eps) << " risk=" << fmt(r.mc_risk) << " se=" << fmt(r.std_err)
        << " predicted=" << fmt(r.predicted) << " excess_ratio=" << fmt(r.excess_ratio) << "; ";
  }
  const double ratio = rows.back().excess_ratio;
  const bool band = ratio >= 0.5 && ratio <= 2.0;
  out.pass = above && band;
  msg << "risk > 1 - 3se at all eps: " << (above ? "yes" : "no") << "; excess_ratio at eps=0.02 in [0.5, 2]: "
      << (band ? "yes" : "no");
  out.detail = msg.str();
  return out;
}

// 7. Derivative relative MISE equals R[f,h] / ||f'||^2.
inline Outcome criterion7(const Options& o, int threads) {
  const double eps = 0.05;
  const SignalSpectrum f = canonical_signal();
  const WeightSequence h = canonical_weights(eps);
  const SampleStats mc = derivative_mise_mc(f, h, kTheta, eps, kTruncation, 10000, o.seed, 4 * kTruncation + 1, threads);
  const double exact = derivative_mise(f, h, eps);
  const double z = std::abs(mc.mean - exact) / mc.std_err;
  Outcome out;
  out.pass = z <= 3.0;
  out.detail = "mc=" + fmt(mc.mean) + " se=" + fmt(mc.std_err) + " exact=" + fmt(exact) + " |z|=" + fmt(z) + " (<= 3)";
  return out;
}

// Score-variance oracle for one frequency block: the marginal log-density of
// (x, x*) after integrating out f_k ~ N(fbar, sigma2) is, up to a constant,
//   lambda y^2 / (2 eps^2) + (1 - lambda) fbar y / eps^2,
// y = x cos(2 pi k theta) + x* sin(2 pi k theta). The score is taken by a
// central difference in theta and its second moment averaged over draws.
inline double score_variance_fd(double fbar, double sigma2, double eps, int k, double theta, int draws,
                                std::uint64_t seed) {
  const double lambda = sigma2 / (eps * eps + sigma2);
  const auto logp = [&](double x, double xs, double t) {
    const double y = x * std::cos(kTwoPi * k * t) + xs * std::sin(kTwoPi * k * t);
    return lambda * y * y / (2.0 * eps * eps) + (1.0 - lambda) * fbar * y / (eps * eps);
  };
  const double step = 1e-5 / k;
  double acc = 0.0;
  for (int r = 0; r < draws; ++r) {
    RandomStream rng(seed, static_cast<std::uint64_t>(r), 800);
    const auto eta = rng.normal_pair(0);
    const auto xi = rng.normal_pair(1);
    const double fk = fbar + std::sqrt(sigma2) * eta[0];
    const double x = fk * std::cos(kTwoPi * k * theta) + eps * xi[0];
    const double xs = fk * std::sin(kTwoPi * k * theta) + eps * xi[1];
    const double score = (logp(x, xs, theta + step) - logp(x, xs, theta - step)) / (2.0 * step);
    acc += score * score;
  }
  return acc / draws;
}

// 8. Block Fisher information against the score-variance oracle.
inline Outcome criterion8(const Options& o) {
  RandomStream rng(o.seed, 0, 801);
  Outcome out;
  out.pass = true;
  std::ostringstream msg;
  for (int t = 0; t < 5; ++t) {
    const double fbar = 0.05 + 0.95 * rng.next_uniform();
    const double eps = 0.05 + 0.45 * rng.next_uniform();
    const double sigma2 = eps * eps * 2.0 * rng.next_uniform();
    const int k = 1 + static_cast<int>(5.0 * rng.next_uniform());
    const double exact = block_fisher_info(fbar, sigma2, eps, k);
    double lo = 1e300, hi = -1e300, worst = 0.0;
    for (double theta : {-0.15, 0.0, 0.1}) {
      const double est = score_variance_fd(fbar, sigma2, eps, k, theta, 100000, o.seed + 17 + t);
      worst = std::max(worst, std::abs(est - exact) / exact);
      lo = std::min(lo, est);
      hi = std::max(hi, est);
    }
    const double spread = (hi - lo) / exact;
    const bool ok = worst <= 0.05 && spread <= 0.05;
    out.pass = out.pass && ok;
    msg << "(fbar=" << fmt(fbar) << ", s2=" << fmt(sigma2) << ", eps=" << fmt(eps) << ", k=" << k
        << "): max rel err=" << fmt(worst) << " theta spread=" << fmt(spread) << "; ";
  }
  msg << "(both <= 0.05)";
  out.detail = msg.str();
  return out;
}

inline std::vector<EstimatorSpec> bayes_estimators(const SignalSpectrum& fbar, double eps) {
  const SobolevBall ball = canonical_ball();
  const WeightSequence corrected = canonical_weights(eps);
  WeightRecipe pinsker;
  pinsker.kind = WeightKind::Pinsker;
  return {AdaptiveContrast{corrected},
          AdaptiveContrast{build_weights(pinsker, ball, eps, 1)},
          AdaptiveContrast{projection_weights(4, kTruncation)},
          LinearizedFull{corrected},
          OracleML{fbar}};
}

// 9. Van Trees floor for every feasible full-model estimator, and the
// shrinkage sum against the minimax value.
inline Outcome criterion9(const Options& o, int threads) {
  const double eps = 0.05;
  const SignalSpectrum fbar = canonical_signal();
  const PriorSpec prior = truncated_saddle_prior(fbar, canonical_ball(), eps, std::nullopt, kTau0);
  McOptions mc;
  mc.domain = ParamDomain(kTau0);
  mc.threads = threads;
  const std::vector<EstimatorSpec> specs = bayes_estimators(fbar, eps);
  const std::vector<BayesReport> reps = bayes_risk_experiment(specs, prior, eps, kTruncation, 100000, o.seed, mc);
  Outcome out;
  bool floor_ok = true;
  std::ostringstream msg;
  CsvTable t({"estimator", "eps", "bayes_risk", "std_err", "risk_random_info", "std_err_random_info", "bound_raw",
              "bound_expanded", "degenerate_count"});
  for (std::size_t e = 0; e < reps.size(); ++e) {
    const BayesReport& r = reps[e];
    floor_ok = floor_ok && r.risk >= r.bound_raw - 3.0 * r.std_err;
    msg << estimator_label(specs[e]) << "=" << fmt(r.risk) << "+-" << fmt(r.std_err) << " ";
    t.add_row({estimator_label(specs[e]), r.eps, r.risk, r.std_err, r.risk_random_info, r.std_err_random_info, r.bound_raw,
               r.bound_expanded, static_cast<long long>(r.degenerate_count)});
  }
  msg << "bound_raw=" << fmt(reps.front().bound_raw) << "; ";

  const double small_eps = 1e-3;
  const PriorSpec p2 = truncated_saddle_prior(fbar, canonical_ball(), small_eps, std::nullopt, kTau0);
  const VanTreesBound vt = van_trees_bound(p2, small_eps);
  const double lhs = vt.shrinkage_sum / vt.i_bar;
  const double rhs = minimax_value(canonical_ball(), small_eps).r_exact / norms(fbar).n1;
  const double rel = std::abs(lhs - rhs) / rhs;
  out.pass = floor_ok && rel <= 0.15;
  msg << "all risks >= bound_raw - 3se: " << (floor_ok ? "yes" : "no") << "; eps=1e-3 shrinkage/I_bar=" << fmt(lhs)
      << " r/||f'||^2=" << fmt(rhs) << " rel diff=" << fmt(rel) << " (<= 0.15)";
  out.detail = msg.str();
  out.csv = t.str();
  return out;
}

inline std::vector<CriterionResult> run(const Options& opts,
                                        const std::function<void(const CriterionResult&)>& on_result = {}) {
  std::vector<CriterionResult> results;
  std::map<int, std::string> csv_first;
  const auto selected = [&](int id) { return opts.only.empty() || opts.only.count(id) > 0; };
  const auto record = [&](int id, const std::string& name, const std::function<Outcome()>& body) {
    if (!selected(id)) return;
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r;
    r.id = id;
    r.name = name;
    try {
      Outcome o = body();
      r.pass = o.pass;
      r.detail = o.detail;
      if (!o.csv.empty()) csv_first[id] = std::move(o.csv);
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_result) on_result(r);
    results.push_back(std::move(r));
  };
  const int th = opts.threads;
  record(1, "linearized oracle risk equals closed form", [&] { return criterion1(opts, th); });
  record(2, "saddle point of the second-order risk", [&] { return criterion2(opts); });
  record(3, "bandwidth solver residual and asymptotics", [&] { return criterion3(opts); });
  record(4, "noiseless exact recovery", [&] { return criterion4(opts); });
  record(5, "bias correction beats naive plug-in (paired)", [&] { return criterion5(opts, th); });
  record(6, "second-order risk expansion of the contrast maximizer", [&] { return criterion6(opts, th); });
  record(7, "derivative MISE identity", [&] { return criterion7(opts, th); });
  record(8, "block Fisher information vs score variance", [&] { return criterion8(opts); });
  record(9, "Van Trees floor and shrinkage-sum agreement", [&] { return criterion9(opts, th); });
  record(10, "bitwise determinism across thread counts", [&] {
    // Criteria 1, 5 and 9 are rerun with a different worker count and their
    // CSV output compared byte for byte.
    const int other = th == 1 ? 4 : 1;
    Outcome out;
    out.pass = true;
    std::ostringstream msg;
    const std::pair<int, std::function<Outcome(int)>> runs[] = {
        {1, [&](int n) { return criterion1(opts, n); }},
        {5, [&](int n) { return criterion5(opts, n); }},
        {9, [&](int n) { return criterion9(opts, n); }}};
    for (const auto& [id, fn] : runs) {
      std::string base = csv_first.count(id) ? csv_first[id] : fn(th).csv;
      const std::string again = fn(other).csv;
      const bool same = !base.empty() && base == again;
      out.pass = out.pass && same;
      msg << "criterion " << id << " threads " << th << " vs " << other << ": "
          << (same ? "identical" : "DIFFERENT") << " (" << base.size() << " bytes); ";
    }
    out.detail = msg.str();
    return out;
  });
  return results;
}

}  // namespace shiftlab::selftest

#endif
