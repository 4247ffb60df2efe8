#ifndef SHIFTLAB_RUNNER_HPP
#define SHIFTLAB_RUNNER_HPP

// Experiment orchestration: turns a validated config into CSV tables, a JSON
// summary and tidy plot data. Nothing here touches the filesystem.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "config.hpp"
#include "csv.hpp"
#include "estimators.hpp"
#include "experiments.hpp"
#include "weights.hpp"

namespace shiftlab {

inline std::vector<std::string> plot_header() {
  return {"experiment", "eps", "estimator", "metric", "value", "std_err"};
}

struct ExperimentResult {
  std::string experiment;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> tables;  // file stem -> CSV text
  CsvTable plot{plot_header()};
  json reports = json::array();
  std::vector<std::string> summary;  // one line per report

  std::string summary_json() const {
    json j = {{"config_hash", hash_hex(config_hash)},
              {"seed", seed},
              {"experiment", experiment},
              {"reports", reports}};
    return j.dump(2) + "\n";
  }
};

namespace detail {

inline void add_plot(ExperimentResult& out, double eps, const std::string& est, const std::string& metric,
                     double value, double se) {
  out.plot.add_row({out.experiment, eps, est, metric, value, se});
}

inline std::vector<EstimatorSpec> instantiate_all(const ExperimentConfig& cfg, const SignalSpectrum& f, double eps) {
  std::vector<EstimatorSpec> specs;
  for (const EstimatorConfig& ec : cfg.estimators) specs.push_back(instantiate(ec, cfg, f, eps, 1));
  return specs;
}

inline McOptions mc_options(const ExperimentConfig& cfg, int threads) {
  McOptions o;
  o.domain = cfg.domain();
  o.search = cfg.search;
  o.threads = threads;
  return o;
}

inline int trunc_for(const std::vector<EstimatorSpec>& specs, int K) {
  int t = K;
  for (const auto& s : specs) {
    std::visit(
        [&](const auto& v) {
          if constexpr (requires { v.h; }) t = std::max(t, v.h.support());
          if constexpr (requires { v.f; }) t = std::max(t, v.f.support());
        },
        s);
  }
  return t;
}

// Runs a paired MC comparison per observation model and appends risk rows.
inline void risk_at(ExperimentResult& out, CsvTable& table, CsvTable* estimates, const ExperimentConfig& cfg,
                    const SignalSpectrum& f, double eps, int threads) {
  const std::vector<EstimatorSpec> specs = instantiate_all(cfg, f, eps);
  for (ModelKind kind : {ModelKind::Full, ModelKind::Local}) {
    std::vector<EstimatorSpec> group;
    for (const auto& s : specs) {
      if (required_model(s) == kind) group.push_back(s);
    }
    if (group.empty()) continue;
    const PairedRun run = mc_risk_paired(group, f, cfg.model.theta, eps, trunc_for(group, cfg.model.K),
                                         cfg.mc.reps, cfg.mc.seed, mc_options(cfg, threads));
    for (std::size_t e = 0; e < group.size(); ++e) {
      const RiskReport& r = run.reports[e];
      table.add_row({estimator_label(group[e]), to_string(kind), r.eps, r.theta, r.mean_sq_normalized, r.std_err,
                     static_cast<long long>(r.reps), static_cast<long long>(r.degenerate_count)});
      add_plot(out, eps, estimator_label(group[e]), "risk_normalized", r.mean_sq_normalized, r.std_err);
      out.reports.push_back({{"estimator", estimator_label(group[e])},
                             {"model", to_string(kind)},
                             {"eps", r.eps},
                             {"theta", r.theta},
                             {"mean_sq_normalized", r.mean_sq_normalized},
                             {"std_err", r.std_err},
                             {"reps", r.reps},
                             {"degenerate_count", r.degenerate_count},
                             {"spec", to_json(group[e])}});
      out.summary.push_back(estimator_label(group[e]) + " eps=" + format_double(eps) + " risk=" +
                            format_double(r.mean_sq_normalized) + " se=" + format_double(r.std_err) +
                            " degenerate=" + std::to_string(r.degenerate_count));
      if (estimates) {
        for (std::size_t i = 0; i < run.estimates[e].size(); ++i) {
          estimates->add_row({static_cast<long long>(i), estimator_label(group[e]), eps, run.estimates[e][i],
                              static_cast<long long>(run.degenerate[e][i])});
        }
      }
    }
  }
}

inline std::vector<std::string> risk_header() {
  return {"estimator", "model", "eps", "theta", "mean_sq_normalized", "std_err", "reps", "degenerate_count"};
}

inline PriorSpec build_prior(const ExperimentConfig& cfg, const SignalSpectrum& fbar, double eps) {
  const PriorConfig pc = cfg.prior.value_or(PriorConfig{});
  if (pc.kind == "explicit") {
    return PriorSpec(fbar, pc.sigma2, ThetaPrior::cosine_squared(cfg.model.tau0));
  }
  return truncated_saddle_prior(fbar, cfg.ball(), eps, pc.gamma, cfg.model.tau0);
}

inline void run_simulate(ExperimentResult& out, const ExperimentConfig& cfg) {
  const SignalSpectrum f = cfg.signal();
  RandomStream rng(cfg.mc.seed, 0, kNoiseStream);
  const SequenceObservation obs = simulate(f, cfg.model.theta, cfg.model.eps, cfg.model.K, cfg.model.kind, rng);
  CsvTable t({"k", "f_k", "x_k", "x_star_k"});
  t.add_comment("model=" + std::string(to_string(obs.kind)) + " theta=" + format_double(cfg.model.theta) +
                " eps=" + format_double(obs.eps));
  for (int k = 1; k <= obs.truncation(); ++k) {
    t.add_row({static_cast<long long>(k), f.coeff(k), obs.at(k).a, obs.at(k).b});
  }
  out.tables["observation"] = t.str();
  out.reports.push_back({{"kind", "observation"},
                         {"model", to_string(obs.kind)},
                         {"theta", cfg.model.theta},
                         {"eps", obs.eps},
                         {"K", obs.truncation()}});
  out.summary.push_back("simulated " + std::to_string(obs.truncation()) + " coefficients, model=" +
                        to_string(obs.kind) + " eps=" + format_double(obs.eps));
}

inline void run_estimate(ExperimentResult& out, const ExperimentConfig& cfg) {
  const SignalSpectrum f = cfg.signal();
  const double eps = cfg.model.eps;
  const std::vector<EstimatorSpec> specs = instantiate_all(cfg, f, eps);
  CsvTable t({"estimator", "model", "eps", "theta", "estimate", "error", "degenerate_flag"});
  for (const EstimatorSpec& s : specs) {
    const ModelKind kind = required_model(s);
    RandomStream rng(cfg.mc.seed, 0, kNoiseStream);
    const SequenceObservation obs = simulate(f, cfg.model.theta, eps, trunc_for(specs, cfg.model.K), kind, rng);
    const Estimate e = try_estimate(s, obs, cfg.domain(), cfg.search);
    const std::string name = estimator_label(s);
    t.add_row({name, to_string(kind), eps, cfg.model.theta, e.value, e.value - cfg.model.theta,
               static_cast<long long>(e.degenerate ? 1 : 0)});
    add_plot(out, eps, name, "estimate", e.value, 0.0);
    out.reports.push_back({{"estimator", name},
                           {"model", to_string(kind)},
                           {"eps", eps},
                           {"theta", cfg.model.theta},
                           {"estimate", e.value},
                           {"raw", e.raw},
                           {"degenerate", e.degenerate}});
    out.summary.push_back(name + " estimate=" + format_double(e.value) + " (theta=" +
                          format_double(cfg.model.theta) + ")" + (e.degenerate ? " degenerate" : ""));
  }
  out.tables["estimates"] = t.str();
}

inline void run_risk(ExperimentResult& out, const ExperimentConfig& cfg, const std::vector<double>& eps_list,
                     int threads) {
  const SignalSpectrum f = cfg.signal();
  CsvTable table(risk_header());
  CsvTable estimates({"replication", "estimator", "eps", "estimate", "degenerate_flag"});
  for (double eps : eps_list) risk_at(out, table, cfg.output.estimates ? &estimates : nullptr, cfg, f, eps, threads);
  out.tables["risk"] = table.str();
  if (cfg.output.estimates) out.tables["replications"] = estimates.str();
}

inline void run_theorem1(ExperimentResult& out, const ExperimentConfig& cfg, int threads) {
  const SignalSpectrum f = cfg.signal();
  const bool in_class = check_class_F(f, cfg.class_params());
  const std::vector<Theorem1Row> rows = verify_theorem1(f, cfg.weights, cfg.ball(), cfg.model.theta,
                                                        cfg.model.eps_list, cfg.model.K, cfg.mc.reps, cfg.mc.seed,
                                                        mc_options(cfg, threads));
  CsvTable t({"eps", "mc_risk", "predicted", "excess_ratio", "std_err", "W", "degenerate_count", "risk_above_floor",
              "ratio_in_band", "b0", "b1", "b2"});
  t.add_comment("signal in class F: " + std::string(in_class ? "yes" : "no") + "; excess band [" +
                format_double(cfg.tolerance.excess_lo) + ", " + format_double(cfg.tolerance.excess_hi) + "]");
  for (const Theorem1Row& r : rows) {
    const WeightSequence h = build_weights(cfg.weights, cfg.ball(), r.eps, 1);
    const AssumptionReport a = check_assumptions(h, r.eps, cfg.assumption_params(), f);
    const bool above = r.mc_risk > 1.0 - 3.0 * r.std_err;
    const bool band = r.excess_ratio >= cfg.tolerance.excess_lo && r.excess_ratio <= cfg.tolerance.excess_hi;
    t.add_row({r.eps, r.mc_risk, r.predicted, r.excess_ratio, r.std_err, r.W,
               static_cast<long long>(r.degenerate_count), static_cast<long long>(above),
               static_cast<long long>(band), static_cast<long long>(a.b0), static_cast<long long>(a.b1),
               static_cast<long long>(a.b2)});
    add_plot(out, r.eps, "adaptive_contrast", "mc_risk", r.mc_risk, r.std_err);
    add_plot(out, r.eps, "adaptive_contrast", "predicted", r.predicted, 0.0);
    add_plot(out, r.eps, "adaptive_contrast", "excess_ratio", r.excess_ratio, r.std_err / (r.predicted - 1.0));
    out.reports.push_back({{"eps", r.eps},
                           {"mc_risk", r.mc_risk},
                           {"predicted", r.predicted},
                           {"excess_ratio", r.excess_ratio},
                           {"std_err", r.std_err},
                           {"W", r.W},
                           {"degenerate_count", r.degenerate_count},
                           {"risk_above_floor", above},
                           {"ratio_in_band", band},
                           {"signal_in_class", in_class},
                           {"assumption_b", {{"b0", a.b0}, {"b1", a.b1}, {"b2", a.b2}, {"c_ratio", a.c_ratio}}}});
    out.summary.push_back("eps=" + format_double(r.eps) + " mc_risk=" + format_double(r.mc_risk) + " predicted=" +
                          format_double(r.predicted) + " excess_ratio=" + format_double(r.excess_ratio) +
                          (band ? " (in band)" : " (outside band)"));
  }
  out.tables["theorem1"] = t.str();
}

/// Pinsker weights, corrected weights and saddle variances at one noise level.
inline std::string weights_table(const SobolevBall& ball, double eps, std::optional<double> gamma,
                                 int min_support) {
  const BandwidthSolution bw = solve_bandwidth(ball, eps);
  const int K = std::max(detail::required_support(bw.W), min_support);
  const double g = gamma.value_or(default_gamma(eps));
  const WeightSequence q = pinsker_weights(ball, bw.W, K);
  const WeightSequence lam = corrected_weights(ball, bw.W, g, K);
  const std::vector<double> s2 = prior_variances(q, eps, PriorVarianceMode::saddle());
  CsvTable t({"k", "q_k", "lambda_star_k", "s2_k"});
  t.add_comment("W_eps=" + format_double(bw.W));
  t.add_comment("beta=" + format_double(ball.beta) + " L=" + format_double(ball.L) + " eps=" + format_double(eps) +
                " gamma=" + format_double(g));
  for (int k = 1; k <= K; ++k) {
    t.add_row({static_cast<long long>(k), q.at(k), lam.at(k), s2[static_cast<std::size_t>(k - 1)]});
  }
  return t.str();
}

inline void run_weights(ExperimentResult& out, const ExperimentConfig& cfg) {
  const double eps = cfg.model.eps;
  if (!(eps > 0.0)) throw InvalidInput("weights: eps must be > 0");
  double g = default_gamma(eps);
  if (cfg.weights.kind == WeightKind::Corrected && cfg.weights.gamma) g = *cfg.weights.gamma;
  out.tables["weights"] = weights_table(cfg.ball(), eps, g, 1);
  const MinimaxValue mv = minimax_value(cfg.ball(), eps);
  add_plot(out, eps, "", "W", mv.W, 0.0);
  add_plot(out, eps, "", "minimax_risk", mv.r_exact, 0.0);
  add_plot(out, eps, "", "minimax_risk_asymptotic", mv.r_asym, 0.0);
  out.reports.push_back({{"eps", eps},
                         {"W", mv.W},
                         {"W_asymptotic", bandwidth_asymptotic(cfg.ball(), eps)},
                         {"r_exact", mv.r_exact},
                         {"r_asym", mv.r_asym},
                         {"c_star", mv.c_star}});
  out.summary.push_back("eps=" + format_double(eps) + " W=" + format_double(mv.W) +
                        " r=" + format_double(mv.r_exact) + " r_asym=" + format_double(mv.r_asym));
}

inline void run_lowerbound(ExperimentResult& out, const ExperimentConfig& cfg, int threads) {
  const SignalSpectrum fbar = cfg.signal();
  const double eps = cfg.model.eps;
  const PriorSpec prior = build_prior(cfg, fbar, eps);
  const std::vector<EstimatorSpec> specs = instantiate_all(cfg, fbar, eps);
  const std::vector<BayesReport> reps = bayes_risk_experiment(specs, prior, eps, cfg.model.K, cfg.mc.reps,
                                                              cfg.mc.seed, mc_options(cfg, threads));
  CsvTable t({"estimator", "eps", "bayes_risk", "std_err", "risk_random_info", "std_err_random_info", "bound_raw",
              "bound_expanded", "above_floor", "degenerate_count"});
  for (std::size_t e = 0; e < reps.size(); ++e) {
    const BayesReport& r = reps[e];
    const bool above = r.risk >= r.bound_raw - 3.0 * r.std_err;
    const std::string label = estimator_label(specs[e]);
    t.add_row({label, r.eps, r.risk, r.std_err, r.risk_random_info, r.std_err_random_info, r.bound_raw,
               r.bound_expanded, static_cast<long long>(above), static_cast<long long>(r.degenerate_count)});
    add_plot(out, eps, label, "bayes_risk", r.risk, r.std_err);
    add_plot(out, eps, label, "bayes_risk_random_info", r.risk_random_info, r.std_err_random_info);
    out.reports.push_back({{"estimator", label},
                           {"eps", r.eps},
                           {"bayes_risk", r.risk},
                           {"std_err", r.std_err},
                           {"risk_random_info", r.risk_random_info},
                           {"std_err_random_info", r.std_err_random_info},
                           {"bound_raw", r.bound_raw},
                           {"bound_expanded", r.bound_expanded},
                           {"above_floor", above},
                           {"degenerate_count", r.degenerate_count},
                           {"spec", to_json(specs[e])}});
    out.summary.push_back(label + " bayes_risk=" + format_double(r.risk) + " se=" + format_double(r.std_err) +
                          " bound=" + format_double(r.bound_raw) + (above ? "" : " BELOW FLOOR"));
  }
  out.tables["bayes"] = t.str();

  // Bound and shrinkage-sum comparison at the model eps and the check levels.
  // The vicinity radius uses delta^2 = eps^2 W gamma^{2 - 2 beta}; that
  // finite-eps choice is a convention and is reported as such.
  std::vector<double> levels{eps};
  const PriorConfig pc = cfg.prior.value_or(PriorConfig{});
  for (double e : pc.eps_check) {
    if (e != eps) levels.push_back(e);
  }
  CsvTable b({"eps", "W", "gamma", "delta", "i_bar", "i_pi", "j_total", "bound_raw", "bound_expanded",
              "shrinkage_ratio", "minimax_ratio", "relative_gap", "outside_vicinity_rate"});
  b.add_comment("delta^2 = eps^2 W gamma^(2 - 2 beta) (convention); outside_vicinity_rate is a measurement only");
  const double n1 = norms(fbar).n1;
  for (double e : levels) {
    const PriorSpec p = build_prior(cfg, fbar, e);
    const VanTreesBound vt = van_trees_bound(p, e);
    const MinimaxValue mv = minimax_value(cfg.ball(), e);
    const double g = pc.gamma.value_or(default_gamma(e));
    const double delta = vicinity_radius(e, mv.W, g, cfg.beta);
    const double shrink = vt.shrinkage_sum / vt.i_bar;
    const double mm = mv.r_exact / n1;
    const double rate = membership_rate(p, delta, cfg.ball(), std::max(1000, std::min(cfg.mc.reps, 10000)),
                                        cfg.mc.seed, threads);
    b.add_row({e, mv.W, g, delta, vt.i_bar, vt.i_pi, vt.j_total, vt.bound_raw, vt.bound_expanded, shrink, mm,
               (shrink - mm) / mm, rate});
    add_plot(out, e, "", "bound_raw", vt.bound_raw, 0.0);
    add_plot(out, e, "", "bound_expanded", vt.bound_expanded, 0.0);
    add_plot(out, e, "", "shrinkage_ratio", shrink, 0.0);
    add_plot(out, e, "", "minimax_ratio", mm, 0.0);
    out.summary.push_back("eps=" + format_double(e) + " bound_raw=" + format_double(vt.bound_raw) +
                          " shrinkage/I_bar=" + format_double(shrink) + " r/||f'||^2=" + format_double(mm));
  }
  out.tables["bounds"] = b.str();
}

}  // namespace detail

/// Runs the experiment named in `cfg` with `threads` workers.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads) {
  ExperimentResult out;
  out.experiment = cfg.display_name();
  out.config_hash = config_hash(cfg);
  out.seed = cfg.mc.seed;
  switch (cfg.experiment) {
    case ExperimentKind::Simulate: detail::run_simulate(out, cfg); break;
    case ExperimentKind::Estimate: detail::run_estimate(out, cfg); break;
    case ExperimentKind::Risk: detail::run_risk(out, cfg, {cfg.model.eps}, threads); break;
    case ExperimentKind::Sweep: detail::run_risk(out, cfg, cfg.model.eps_list, threads); break;
    case ExperimentKind::VerifyTheorem1: detail::run_theorem1(out, cfg, threads); break;
    case ExperimentKind::Weights: detail::run_weights(out, cfg); break;
    case ExperimentKind::LowerBound: detail::run_lowerbound(out, cfg, threads); break;
  }
  return out;
}

}  // namespace shiftlab

#endif
