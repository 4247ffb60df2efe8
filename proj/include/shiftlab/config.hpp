#ifndef SHIFTLAB_CONFIG_HPP
#define SHIFTLAB_CONFIG_HPP

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "estimators.hpp"
#include "experiments.hpp"
#include "signal_model.hpp"
#include "weights.hpp"

namespace shiftlab {

using json = nlohmann::json;

enum class ExperimentKind { Simulate, Estimate, Risk, VerifyTheorem1, Weights, LowerBound, Sweep };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Simulate: return "simulate";
    case ExperimentKind::Estimate: return "estimate";
    case ExperimentKind::Risk: return "risk";
    case ExperimentKind::VerifyTheorem1: return "verify_theorem1";
    case ExperimentKind::Weights: return "weights";
    case ExperimentKind::LowerBound: return "lowerbound";
    case ExperimentKind::Sweep: return "sweep";
  }
  return "?";
}

inline ExperimentKind parse_experiment_kind(const std::string& s) {
  for (ExperimentKind k : {ExperimentKind::Simulate, ExperimentKind::Estimate, ExperimentKind::Risk,
                           ExperimentKind::VerifyTheorem1, ExperimentKind::Weights, ExperimentKind::LowerBound,
                           ExperimentKind::Sweep}) {
    if (s == to_string(k)) return k;
  }
  throw InvalidInput("config: unknown experiment '" + s +
                     "' (expected simulate, estimate, risk, verify_theorem1, weights, lowerbound or sweep)");
}

inline WeightKind parse_weight_kind(const std::string& s, const std::string& where) {
  for (WeightKind k : {WeightKind::Projection, WeightKind::Pinsker, WeightKind::Corrected, WeightKind::Custom}) {
    if (s == to_string(k)) return k;
  }
  throw InvalidInput("config: " + where + " has unknown weight kind '" + s +
                     "' (expected projection, pinsker, corrected or custom)");
}

inline const std::vector<std::string>& estimator_kinds() {
  static const std::vector<std::string> kinds = {"oracle_ml",  "adaptive_contrast", "linearized_full",
                                                 "local_known", "local_naive",       "local_corrected",
                                                 "linearized_oracle"};
  return kinds;
}

/// Signal model. An empty `signal` selects the Sobolev boundary signal with
/// `signal_support` coefficients.
struct ModelConfig {
  ModelKind kind = ModelKind::Full;
  std::vector<double> signal;
  int signal_support = 32;
  double theta = 0.05;
  double eps = 0.05;
  std::vector<double> eps_list{0.2, 0.1, 0.05, 0.02};
  int K = 32;
  double tau0 = 0.2;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Estimator entry. Weighted estimators take `weights` when given, otherwise
/// the top-level recipe; signal-aware ones use the model signal (or the prior
/// mean in Bayes experiments).
struct EstimatorConfig {
  std::string kind = "adaptive_contrast";
  std::optional<WeightRecipe> weights;

  friend bool operator==(const EstimatorConfig&, const EstimatorConfig&) = default;
};

struct McConfig {
  int reps = 10000;
  std::uint64_t seed = 20240601;

  friend bool operator==(const McConfig&, const McConfig&) = default;
};

/// Gaussian prior on the signal. `truncated_saddle` builds the variances from
/// the Pinsker saddle point; `explicit` takes them from `sigma2`.
struct PriorConfig {
  std::string kind = "truncated_saddle";
  std::optional<double> gamma;
  std::vector<double> sigma2;
  std::vector<double> eps_check{1e-3};  // noise levels for the shrinkage-sum comparison

  friend bool operator==(const PriorConfig&, const PriorConfig&) = default;
};

struct ToleranceConfig {
  double excess_lo = 0.5;
  double excess_hi = 2.0;

  friend bool operator==(const ToleranceConfig&, const ToleranceConfig&) = default;
};

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> formats{"csv", "json"};
  bool estimates = false;  // per-replication CSV for risk experiments

  friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::Risk;
  std::string name;
  ModelConfig model;
  double beta = 2.0;
  double L = 1.0;
  WeightRecipe weights;
  std::vector<EstimatorConfig> estimators{EstimatorConfig{}};
  McConfig mc;
  std::optional<PriorConfig> prior;
  double class_rho = 1e-4;
  double class_c0 = 1e4;
  double assumption_rho1 = 1e-3;
  double assumption_c1 = 1e3;
  SearchOptions search;
  ToleranceConfig tolerance;
  OutputConfig output;
  int threads = 0;  // 0: SHIFT_LAB_THREADS or hardware concurrency

  SobolevBall ball() const { return SobolevBall(beta, L); }
  ParamDomain domain() const { return ParamDomain(model.tau0); }
  ClassParams class_params() const { return ClassParams(class_rho, class_c0); }
  AssumptionBParams assumption_params() const { return AssumptionBParams(assumption_rho1, assumption_c1); }

  SignalSpectrum signal() const {
    if (model.signal.empty()) return sobolev_boundary_signal(ball(), model.signal_support);
    return SignalSpectrum(model.signal);
  }

  std::string display_name() const { return name.empty() ? std::string(to_string(experiment)) : name; }

  friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.experiment == b.experiment && a.name == b.name && a.model == b.model && a.beta == b.beta &&
           a.L == b.L && a.weights == b.weights && a.estimators == b.estimators && a.mc == b.mc &&
           a.prior == b.prior && a.class_rho == b.class_rho && a.class_c0 == b.class_c0 &&
           a.assumption_rho1 == b.assumption_rho1 && a.assumption_c1 == b.assumption_c1 &&
           a.search.grid_points == b.search.grid_points && a.search.refine_tol == b.search.refine_tol &&
           a.search.refine_max_iter == b.search.refine_max_iter && a.tolerance == b.tolerance &&
           a.output == b.output && a.threads == b.threads;
  }
};

namespace detail {

// Field readers that name the offending path in their error.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InvalidInput("config: '" + display() + "' must be an object");
  }

  template <class F>
  void opt(const char* key, F&& assign) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    assign(*it, child(key));
  }

  double number(const char* key, double dflt) {
    double v = dflt;
    opt(key, [&](const json& x, const std::string& p) { v = as_number(x, p); });
    return v;
  }

  int integer(const char* key, int dflt) {
    int v = dflt;
    opt(key, [&](const json& x, const std::string& p) { v = static_cast<int>(as_integer(x, p, INT32_MIN, INT32_MAX)); });
    return v;
  }

  std::string string(const char* key, std::string dflt) {
    std::string v = std::move(dflt);
    opt(key, [&](const json& x, const std::string& p) { v = as_string(x, p); });
    return v;
  }

  std::vector<double> numbers(const char* key, std::vector<double> dflt) {
    std::vector<double> v = std::move(dflt);
    opt(key, [&](const json& x, const std::string& p) { v = as_numbers(x, p); });
    return v;
  }

  /// Rejects keys that no reader asked for, which catches typos.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw InvalidInput("config: unknown field '" + child(it.key()) + "'");
    }
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  static double as_number(const json& x, const std::string& p) {
    if (!x.is_number()) throw InvalidInput("config: field '" + p + "' must be a number");
    const double v = x.get<double>();
    if (!std::isfinite(v)) throw InvalidInput("config: field '" + p + "' must be finite");
    return v;
  }

  static long long as_integer(const json& x, const std::string& p, long long lo, long long hi) {
    if (x.is_number_integer() || x.is_number_unsigned()) {
      const long long v = x.is_number_unsigned() ? static_cast<long long>(x.get<std::uint64_t>()) : x.get<long long>();
      if (v < lo || v > hi) throw InvalidInput("config: field '" + p + "' is out of range");
      return v;
    }
    if (x.is_number_float()) {
      const double d = x.get<double>();
      if (std::floor(d) == d && d >= static_cast<double>(lo) && d <= static_cast<double>(hi)) {
        return static_cast<long long>(d);
      }
    }
    throw InvalidInput("config: field '" + p + "' must be an integer");
  }

  static std::string as_string(const json& x, const std::string& p) {
    if (!x.is_string()) throw InvalidInput("config: field '" + p + "' must be a string");
    return x.get<std::string>();
  }

  static std::vector<double> as_numbers(const json& x, const std::string& p) {
    if (!x.is_array()) throw InvalidInput("config: field '" + p + "' must be an array of numbers");
    std::vector<double> v;
    for (std::size_t i = 0; i < x.size(); ++i) v.push_back(as_number(x[i], p + "[" + std::to_string(i) + "]"));
    return v;
  }

 private:
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

// ---- weights ---------------------------------------------------------------

inline json to_json(const WeightRecipe& r) {
  json j = {{"kind", to_string(r.kind)}};
  if (r.kind == WeightKind::Projection) j["N"] = r.N;
  if (r.kind == WeightKind::Corrected && r.gamma) j["gamma"] = *r.gamma;
  if (r.kind == WeightKind::Custom) j["values"] = r.values;
  return j;
}

inline WeightRecipe weight_recipe_from_json(const json& j, const std::string& path) {
  detail::Reader rd(j, path);
  WeightRecipe r;
  r.kind = parse_weight_kind(rd.string("kind", "corrected"), rd.child("kind"));
  if (r.kind == WeightKind::Projection) {
    r.N = rd.integer("N", 0);
    if (r.N < 1) throw InvalidInput("config: field '" + rd.child("N") + "' must be >= 1 for projection weights");
  }
  if (r.kind == WeightKind::Corrected) {
    rd.opt("gamma", [&](const json& x, const std::string& p) {
      r.gamma = detail::Reader::as_number(x, p);
      if (!(*r.gamma > 0.0 && *r.gamma < 1.0)) throw InvalidInput("config: field '" + p + "' must lie in (0, 1)");
    });
  }
  if (r.kind == WeightKind::Custom) {
    r.values = rd.numbers("values", {});
    if (r.values.empty()) throw InvalidInput("config: field '" + rd.child("values") + "' must be non-empty");
  }
  rd.finish();
  return r;
}

/// Concrete weights as {kind, parameters, values}.
inline json to_json(const WeightSequence& h) {
  json params = json::object();
  switch (h.kind) {
    case WeightKind::Projection: params["N"] = h.N; break;
    case WeightKind::Pinsker: params["beta"] = h.beta; params["W"] = h.W; break;
    case WeightKind::Corrected:
      params["beta"] = h.beta;
      params["W"] = h.W;
      params["gamma"] = h.gamma;
      break;
    case WeightKind::Custom: params["clipped"] = h.clipped; break;
  }
  return {{"kind", to_string(h.kind)}, {"parameters", params}, {"values", h.values}};
}

inline WeightSequence weight_sequence_from_json(const json& j, const std::string& path = "weights") {
  detail::Reader rd(j, path);
  WeightSequence h;
  h.kind = parse_weight_kind(rd.string("kind", "custom"), rd.child("kind"));
  h.values = rd.numbers("values", {});
  for (double v : h.values) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("config: field '" + rd.child("values") + "' must lie in [0, 1]");
  }
  rd.opt("parameters", [&](const json& x, const std::string& p) {
    detail::Reader pr(x, p);
    h.N = pr.integer("N", 0);
    h.beta = pr.number("beta", 0.0);
    h.W = pr.number("W", 0.0);
    h.gamma = pr.number("gamma", 0.0);
    pr.opt("clipped", [&](const json& c, const std::string& cp) {
      if (!c.is_boolean()) throw InvalidInput("config: field '" + cp + "' must be a boolean");
      h.clipped = c.get<bool>();
    });
    pr.finish();
  });
  rd.finish();
  return h;
}

// ---- estimators ------------------------------------------------------------

/// Instantiated estimator as a tagged object.
inline json to_json(const EstimatorSpec& spec) {
  json j = {{"kind", estimator_name(spec)}};
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (requires { s.h; }) j["weights"] = to_json(s.h);
        if constexpr (requires { s.f; }) {
          const auto c = s.f.coeffs();
          j["signal"] = std::vector<double>(c.begin(), c.end());
        }
        (void)sizeof(T);
      },
      spec);
  return j;
}

inline EstimatorSpec estimator_spec_from_json(const json& j, const std::string& path = "estimator") {
  detail::Reader rd(j, path);
  const std::string kind = rd.string("kind", "");
  std::optional<WeightSequence> h;
  std::optional<SignalSpectrum> f;
  rd.opt("weights", [&](const json& x, const std::string& p) { h = weight_sequence_from_json(x, p); });
  rd.opt("signal", [&](const json& x, const std::string& p) { f = SignalSpectrum(detail::Reader::as_numbers(x, p)); });
  rd.finish();
  const auto need_h = [&]() -> WeightSequence {
    if (!h) throw InvalidInput("config: field '" + rd.child("weights") + "' is required for " + kind);
    return *h;
  };
  const auto need_f = [&]() -> SignalSpectrum {
    if (!f) throw InvalidInput("config: field '" + rd.child("signal") + "' is required for " + kind);
    return *f;
  };
  if (kind == "oracle_ml") return OracleML{need_f()};
  if (kind == "adaptive_contrast") return AdaptiveContrast{need_h()};
  if (kind == "linearized_full") return LinearizedFull{need_h()};
  if (kind == "local_known") return LocalKnown{need_f()};
  if (kind == "local_naive") return LocalNaive{need_h()};
  if (kind == "local_corrected") return LocalCorrected{need_h()};
  if (kind == "linearized_oracle") return LinearizedOracle{need_h(), need_f()};
  throw InvalidInput("config: field '" + rd.child("kind") + "' has unknown estimator '" + kind + "'");
}

inline bool estimator_uses_weights(const std::string& kind) {
  return kind != "oracle_ml" && kind != "local_known";
}

/// Builds the estimator at noise level eps. `f` is the signal handed to
/// oracle estimators; `min_support` pads weight sequences.
inline EstimatorSpec instantiate(const EstimatorConfig& ec, const ExperimentConfig& cfg, const SignalSpectrum& f,
                                 double eps, int min_support) {
  const auto weights = [&] {
    return build_weights(ec.weights.value_or(cfg.weights), cfg.ball(), eps, min_support, 1e-10);
  };
  const std::string& k = ec.kind;
  if (k == "oracle_ml") return OracleML{f};
  if (k == "adaptive_contrast") return AdaptiveContrast{weights()};
  if (k == "linearized_full") return LinearizedFull{weights()};
  if (k == "local_known") return LocalKnown{f};
  if (k == "local_naive") return LocalNaive{weights()};
  if (k == "local_corrected") return LocalCorrected{weights()};
  if (k == "linearized_oracle") return LinearizedOracle{weights(), f};
  throw InvalidInput("config: unknown estimator '" + k + "'");
}

// ---- experiment config -----------------------------------------------------

inline json to_json(const ExperimentConfig& c) {
  json model = {{"kind", to_string(c.model.kind)}, {"theta", c.model.theta}, {"eps", c.model.eps},
                {"eps_list", c.model.eps_list}, {"K", c.model.K}, {"tau0", c.model.tau0}};
  if (c.model.signal.empty()) {
    model["signal_support"] = c.model.signal_support;
  } else {
    model["signal"] = c.model.signal;
  }
  json ests = json::array();
  for (const EstimatorConfig& e : c.estimators) {
    json j = {{"kind", e.kind}};
    if (e.weights) j["weights"] = to_json(*e.weights);
    ests.push_back(j);
  }
  json j = {{"experiment", to_string(c.experiment)},
            {"name", c.name},
            {"model", model},
            {"ball", {{"beta", c.beta}, {"L", c.L}}},
            {"weights", to_json(c.weights)},
            {"estimators", ests},
            {"mc", {{"reps", c.mc.reps}, {"seed", c.mc.seed}}},
            {"class_params", {{"rho", c.class_rho}, {"C0", c.class_c0}}},
            {"assumption_b", {{"rho1", c.assumption_rho1}, {"C1", c.assumption_c1}}},
            {"search",
             {{"grid_points", c.search.grid_points},
              {"refine_tol", c.search.refine_tol},
              {"refine_max_iter", c.search.refine_max_iter}}},
            {"tolerance", {{"excess_lo", c.tolerance.excess_lo}, {"excess_hi", c.tolerance.excess_hi}}},
            {"output",
             {{"directory", c.output.directory}, {"formats", c.output.formats}, {"estimates", c.output.estimates}}},
            {"threads", c.threads}};
  if (c.prior) {
    json p = {{"kind", c.prior->kind}, {"eps_check", c.prior->eps_check}};
    if (c.prior->gamma) p["gamma"] = *c.prior->gamma;
    if (c.prior->kind == "explicit") p["sigma2"] = c.prior->sigma2;
    j["prior"] = p;
  }
  return j;
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  detail::Reader rd(j, "");
  c.experiment = parse_experiment_kind(rd.string("experiment", "risk"));
  c.name = rd.string("name", "");

  rd.opt("model", [&](const json& x, const std::string& p) {
    detail::Reader m(x, p);
    const std::string kind = m.string("kind", "full");
    if (kind != "full" && kind != "local") {
      throw InvalidInput("config: field '" + m.child("kind") + "' must be 'full' or 'local'");
    }
    c.model.kind = kind == "full" ? ModelKind::Full : ModelKind::Local;
    c.model.signal = m.numbers("signal", {});
    c.model.signal_support = m.integer("signal_support", c.model.signal_support);
    c.model.theta = m.number("theta", c.model.theta);
    c.model.eps = m.number("eps", c.model.eps);
    c.model.eps_list = m.numbers("eps_list", c.model.eps_list);
    c.model.K = m.integer("K", c.model.K);
    c.model.tau0 = m.number("tau0", c.model.tau0);
    m.finish();
    if (!c.model.signal.empty()) c.model.signal_support = static_cast<int>(c.model.signal.size());
    if (c.model.signal_support < 1) throw InvalidInput("config: field '" + m.child("signal_support") + "' must be >= 1");
    if (c.model.K < c.model.signal_support) {
      throw InvalidInput("config: field '" + m.child("K") + "' must be >= the signal support (" +
                         std::to_string(c.model.signal_support) + ")");
    }
    if (!(c.model.eps >= 0.0)) throw InvalidInput("config: field '" + m.child("eps") + "' must be >= 0");
    for (double e : c.model.eps_list) {
      if (!(e > 0.0)) throw InvalidInput("config: field '" + m.child("eps_list") + "' entries must be > 0");
    }
    try {
      ParamDomain d(c.model.tau0);
      if (c.model.kind == ModelKind::Full && !d.contains(c.model.theta)) {
        throw InvalidInput("theta = " + std::to_string(c.model.theta) + " lies outside [-tau0, tau0]");
      }
    } catch (const InvalidInput& e) {
      throw InvalidInput("config: field '" + m.child("tau0") + "': " + e.what());
    }
  });

  rd.opt("ball", [&](const json& x, const std::string& p) {
    detail::Reader b(x, p);
    c.beta = b.number("beta", c.beta);
    c.L = b.number("L", c.L);
    b.finish();
    try {
      (void)c.ball();
    } catch (const InvalidInput& e) {
      throw InvalidInput("config: field '" + p + "': " + e.what());
    }
  });

  rd.opt("weights", [&](const json& x, const std::string& p) { c.weights = weight_recipe_from_json(x, p); });

  rd.opt("estimators", [&](const json& x, const std::string& p) {
    if (!x.is_array()) throw InvalidInput("config: field '" + p + "' must be an array");
    c.estimators.clear();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const std::string ep = p + "[" + std::to_string(i) + "]";
      detail::Reader e(x[i], ep);
      EstimatorConfig ec;
      ec.kind = e.string("kind", "");
      const auto& kinds = estimator_kinds();
      if (std::find(kinds.begin(), kinds.end(), ec.kind) == kinds.end()) {
        throw InvalidInput("config: field '" + e.child("kind") + "' has unknown estimator '" + ec.kind + "'");
      }
      e.opt("weights", [&](const json& w, const std::string& wp) {
        if (!estimator_uses_weights(ec.kind)) {
          throw InvalidInput("config: field '" + wp + "' is not used by " + ec.kind);
        }
        ec.weights = weight_recipe_from_json(w, wp);
      });
      e.finish();
      c.estimators.push_back(std::move(ec));
    }
  });

  rd.opt("mc", [&](const json& x, const std::string& p) {
    detail::Reader m(x, p);
    c.mc.reps = m.integer("reps", c.mc.reps);
    m.opt("seed", [&](const json& s, const std::string& sp) {
      if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
        throw InvalidInput("config: field '" + sp + "' must be a non-negative integer");
      }
      c.mc.seed = s.get<std::uint64_t>();
    });
    m.finish();
    if (c.mc.reps < 1) throw InvalidInput("config: field '" + m.child("reps") + "' must be >= 1");
  });

  rd.opt("prior", [&](const json& x, const std::string& p) {
    detail::Reader m(x, p);
    PriorConfig pc;
    pc.kind = m.string("kind", pc.kind);
    if (pc.kind != "truncated_saddle" && pc.kind != "explicit") {
      throw InvalidInput("config: field '" + m.child("kind") + "' must be 'truncated_saddle' or 'explicit'");
    }
    m.opt("gamma", [&](const json& g, const std::string& gp) {
      pc.gamma = detail::Reader::as_number(g, gp);
      if (!(*pc.gamma > 0.0 && *pc.gamma < 1.0)) throw InvalidInput("config: field '" + gp + "' must lie in (0, 1)");
    });
    pc.sigma2 = m.numbers("sigma2", {});
    pc.eps_check = m.numbers("eps_check", pc.eps_check);
    m.finish();
    for (double v : pc.sigma2) {
      if (!(v >= 0.0)) throw InvalidInput("config: field '" + m.child("sigma2") + "' entries must be >= 0");
    }
    if (pc.kind == "explicit" && pc.sigma2.empty()) {
      throw InvalidInput("config: field '" + m.child("sigma2") + "' is required for an explicit prior");
    }
    if (pc.kind != "explicit") pc.sigma2.clear();
    c.prior = pc;
  });

  rd.opt("class_params", [&](const json& x, const std::string& p) {
    detail::Reader m(x, p);
    c.class_rho = m.number("rho", c.class_rho);
    c.class_c0 = m.number("C0", c.class_c0);
    m.finish();
    if (!(c.class_rho > 0.0 && c.class_c0 > 0.0)) throw InvalidInput("config: field '" + p + "' must be positive");
  });

  rd.opt("assumption_b", [&](const json& x, const std::string& p) {
    detail::Reader m(x, p);
    c.assumption_rho1 = m.number("rho1", c.assumption_rho1);
    c.assumption_c1 = m.number("C1", c.assumption_c1);
    m.finish();
    if (!(c.assumption_rho1 > 0.0 && c.assumption_c1 > 0.0)) {
      throw InvalidInput("config: field '" + p + "' must be positive");
    }
  });

  rd.opt("search", [&](const json& x, const std::string& p) {
    detail::Reader m(x, p);
    c.search.grid_points = m.integer("grid_points", c.search.grid_points);
    c.search.refine_tol = m.number("refine_tol", c.search.refine_tol);
    c.search.refine_max_iter = m.integer("refine_max_iter", c.search.refine_max_iter);
    m.finish();
    if (c.search.grid_points < 0) throw InvalidInput("config: field '" + m.child("grid_points") + "' must be >= 0");
    if (!(c.search.refine_tol > 0.0)) throw InvalidInput("config: field '" + m.child("refine_tol") + "' must be > 0");
    if (c.search.refine_max_iter < 1) {
      throw InvalidInput("config: field '" + m.child("refine_max_iter") + "' must be >= 1");
    }
  });

  rd.opt("tolerance", [&](const json& x, const std::string& p) {
    detail::Reader m(x, p);
    c.tolerance.excess_lo = m.number("excess_lo", c.tolerance.excess_lo);
    c.tolerance.excess_hi = m.number("excess_hi", c.tolerance.excess_hi);
    m.finish();
    if (!(c.tolerance.excess_lo <= c.tolerance.excess_hi)) {
      throw InvalidInput("config: field '" + p + "' needs excess_lo <= excess_hi");
    }
  });

  rd.opt("output", [&](const json& x, const std::string& p) {
    detail::Reader m(x, p);
    c.output.directory = m.string("directory", c.output.directory);
    m.opt("formats", [&](const json& f, const std::string& fp) {
      if (!f.is_array()) throw InvalidInput("config: field '" + fp + "' must be an array");
      c.output.formats.clear();
      for (const json& s : f) {
        const std::string v = detail::Reader::as_string(s, fp);
        if (v != "csv" && v != "json") throw InvalidInput("config: field '" + fp + "' entries must be csv or json");
        c.output.formats.push_back(v);
      }
    });
    m.opt("estimates", [&](const json& f, const std::string& fp) {
      if (!f.is_boolean()) throw InvalidInput("config: field '" + fp + "' must be a boolean");
      c.output.estimates = f.get<bool>();
    });
    m.finish();
  });

  c.threads = rd.integer("threads", c.threads);
  if (c.threads < 0) throw InvalidInput("config: field 'threads' must be >= 0");
  rd.finish();
  return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("config: not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline std::string serialize_config(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

/// FNV-1a over the canonical dump of the normalized config. Fields that do
/// not change results (worker count, output location and formats) are left
/// out.
inline std::uint64_t config_hash(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("threads");
  j.erase("output");
  const std::string canon = j.dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Applies `key=value` to a JSON document; the key is a dotted path and the
/// value is parsed as JSON when possible, otherwise taken as a string.
inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw InvalidInput("--set expects key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw InvalidInput("--set: empty path component in '" + key + "'");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(parts[i]);
      } catch (const std::exception&) {
        throw InvalidInput("--set: '" + parts[i] + "' is not an array index in '" + key + "'");
      }
      if (idx >= node->size()) throw InvalidInput("--set: index out of range in '" + key + "'");
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) throw InvalidInput("--set: '" + parts[i] + "' is not an object in '" + key + "'");
      node = &(*node)[parts[i]];
    }
  }
  if (node->is_null()) *node = json::object();
  if (node->is_array()) {
    std::size_t idx = 0;
    try {
      idx = std::stoul(parts.back());
    } catch (const std::exception&) {
      throw InvalidInput("--set: '" + parts.back() + "' is not an array index in '" + key + "'");
    }
    if (idx >= node->size()) throw InvalidInput("--set: index out of range in '" + key + "'");
    (*node)[idx] = value;
  } else if (node->is_object()) {
    (*node)[parts.back()] = value;
  } else {
    throw InvalidInput("--set: cannot descend into a scalar in '" + key + "'");
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw InvalidInput("config: " + path + " is not valid JSON: " + e.what());
  }
}

}  // namespace shiftlab

#endif
