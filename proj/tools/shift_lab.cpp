// shift-lab: command-line front end for the shift estimation experiments.
//
// Exit codes: 0 success, 1 validation error, 2 solver failure, 3 I/O error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shiftlab/config.hpp"
#include "shiftlab/csv.hpp"
#include "shiftlab/errors.hpp"
#include "shiftlab/runner.hpp"
#include "shiftlab/selftest.hpp"

namespace {

using namespace shiftlab;

enum Exit { kOk = 0, kValidation = 1, kSolver = 2, kIo = 3 };

struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
  std::optional<std::string> format;
};

void add_common(CLI::App* app, CommonFlags& f, bool config_positional) {
  if (config_positional) {
    app->add_option("config_file", f.config, "experiment config (JSON)");
  }
  app->add_option("--config,-c", f.config, "experiment config (JSON)");
  app->add_option("--set", f.sets, "override a config field, key=value with a dotted key (repeatable)");
  app->add_option("--seed", f.seed, "master seed (mc.seed)");
  app->add_option("--reps", f.reps, "Monte Carlo replications (mc.reps)");
  app->add_option("--out-dir", f.out_dir, "output directory (output.directory)");
  app->add_option("--threads", f.threads, "worker threads (falls back to SHIFT_LAB_THREADS)")->check(CLI::PositiveNumber);
  app->add_option("--format", f.format, "write only this output format")->check(CLI::IsMember({"csv", "json"}));
}

int resolve_cli_threads(std::optional<int> flag, int from_config) {
  if (flag) return *flag;
  if (from_config > 0) return from_config;
  if (const char* env = std::getenv("SHIFT_LAB_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
    throw InvalidInput(std::string("SHIFT_LAB_THREADS must be a positive integer, got '") + env + "'");
  }
  return resolve_threads(0);
}

ExperimentConfig load_config(const CommonFlags& f, std::optional<ExperimentKind> forced) {
  json doc = f.config.empty() ? json::object() : read_json_file(f.config);
  if (!doc.is_object()) throw InvalidInput("config: top level must be a JSON object");
  if (forced) {
    if (doc.contains("experiment") && doc["experiment"] != to_string(*forced)) {
      throw InvalidInput("config: field 'experiment' is '" + doc["experiment"].dump() + "' but the subcommand is " +
                         to_string(*forced));
    }
    doc["experiment"] = to_string(*forced);
  }
  for (const std::string& s : f.sets) apply_override(doc, s);
  if (f.seed) apply_override(doc, "mc.seed=" + std::to_string(*f.seed));
  if (f.reps) apply_override(doc, "mc.reps=" + std::to_string(*f.reps));
  if (f.out_dir) doc["output"]["directory"] = *f.out_dir;
  if (f.format) doc["output"]["formats"] = json::array({*f.format});
  return config_from_json(doc);
}

bool wants(const ExperimentConfig& cfg, const char* fmt) {
  return std::find(cfg.output.formats.begin(), cfg.output.formats.end(), fmt) != cfg.output.formats.end();
}

void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& res) {
  const std::filesystem::path dir = cfg.output.directory;
  const std::string stem = cfg.display_name();
  if (wants(cfg, "csv")) {
    for (const auto& [name, text] : res.tables) {
      const auto p = dir / (stem + "_" + name + ".csv");
      write_atomic(p, text);
      std::cout << "wrote " << p.string() << "\n";
    }
    const auto p = dir / (stem + "_plot.csv");
    write_atomic(p, res.plot.str());
    std::cout << "wrote " << p.string() << "\n";
  }
  if (wants(cfg, "json")) {
    const auto p = dir / (stem + "_summary.json");
    write_atomic(p, res.summary_json());
    std::cout << "wrote " << p.string() << "\n";
  }
}

int run_config(const CommonFlags& f, std::optional<ExperimentKind> forced) {
  const ExperimentConfig cfg = load_config(f, forced);
  const int threads = resolve_cli_threads(f.threads, cfg.threads);
  std::cout << "experiment=" << to_string(cfg.experiment) << " config_hash=" << hash_hex(config_hash(cfg))
            << " seed=" << cfg.mc.seed << " threads=" << threads << "\n";
  const ExperimentResult res = run_experiment(cfg, threads);
  for (const std::string& line : res.summary) std::cout << line << "\n";
  write_outputs(cfg, res);
  return kOk;
}

struct WeightsFlags {
  double beta = 2.0;
  double L = 1.0;
  double eps = 0.0;
  std::optional<double> gamma;
  std::string out;
};

int run_weights_cmd(const WeightsFlags& w) {
  const SobolevBall ball(w.beta, w.L);
  if (!(w.eps > 0.0)) throw InvalidInput("weights: --eps must be > 0");
  const std::string text = detail::weights_table(ball, w.eps, w.gamma, 1);
  if (w.out.empty() || w.out == "-") {
    std::cout << text;
  } else {
    write_atomic(w.out, text);
    std::cout << "wrote " << w.out << "\n";
  }
  return kOk;
}

struct SelftestFlags {
  std::optional<int> threads;
  std::uint64_t seed = selftest::Options{}.seed;
  std::vector<int> only;
};

int run_selftest(const SelftestFlags& s) {
  selftest::Options opts;
  opts.threads = resolve_cli_threads(s.threads, 0);
  opts.seed = s.seed;
  opts.only.insert(s.only.begin(), s.only.end());
  bool all = true;
  selftest::run(opts, [&](const selftest::CriterionResult& r) {
    all = all && r.pass;
    std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << r.id << ": " << r.name << " [" << r.seconds
              << " s] " << r.detail << std::endl;
  });
  return all ? kOk : kValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shift-lab: semiparametric shift estimation in the Gaussian sequence model"};
  app.require_subcommand(1);

  CommonFlags run_f, sim_f, est_f, risk_f, lb_f, sweep_f;
  auto* run = app.add_subcommand("run", "run the experiment described by a config file");
  add_common(run, run_f, true);
  auto* sim = app.add_subcommand("simulate", "draw one observation");
  add_common(sim, sim_f, true);
  auto* est = app.add_subcommand("estimate", "apply the configured estimators to one observation");
  add_common(est, est_f, true);
  auto* risk = app.add_subcommand("risk", "Monte Carlo risk of the configured estimators");
  add_common(risk, risk_f, true);
  auto* lb = app.add_subcommand("lowerbound", "Van Trees bound and Bayes risks under the configured prior");
  add_common(lb, lb_f, true);
  auto* sweep = app.add_subcommand("sweep", "risk over model.eps_list");
  add_common(sweep, sweep_f, true);

  WeightsFlags wf;
  auto* weights = app.add_subcommand("weights", "Pinsker and corrected weights with saddle variances");
  weights->add_option("--beta", wf.beta, "smoothness (> 1)");
  weights->add_option("--L", wf.L, "ellipsoid radius (> 0)");
  weights->add_option("--eps", wf.eps, "noise level")->required();
  weights->add_option("--gamma", wf.gamma, "head fraction of the corrected weights");
  weights->add_option("--out,-o", wf.out, "output CSV (stdout when omitted)");

  SelftestFlags sf;
  auto* st = app.add_subcommand("selftest", "run the acceptance suite");
  st->add_option("--threads", sf.threads, "worker threads")->check(CLI::PositiveNumber);
  st->add_option("--seed", sf.seed, "master seed");
  st->add_option("--only", sf.only, "run only these criteria (1-10)")->check(CLI::Range(1, 10));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    if (*run) {
      if (run_f.config.empty()) throw InvalidInput("run: a config file is required");
      return run_config(run_f, std::nullopt);
    }
    if (*sim) return run_config(sim_f, ExperimentKind::Simulate);
    if (*est) return run_config(est_f, ExperimentKind::Estimate);
    if (*risk) return run_config(risk_f, ExperimentKind::Risk);
    if (*lb) return run_config(lb_f, ExperimentKind::LowerBound);
    if (*sweep) return run_config(sweep_f, ExperimentKind::Sweep);
    if (*weights) return run_weights_cmd(wf);
    if (*st) return run_selftest(sf);
  } catch (const SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolver;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kOk;
}
