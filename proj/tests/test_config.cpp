#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "shiftlab/config.hpp"
#include "shiftlab/csv.hpp"
#include "shiftlab/runner.hpp"

using namespace shiftlab;

namespace {

ExperimentConfig rich_config() {
  ExperimentConfig c;
  c.experiment = ExperimentKind::LowerBound;
  c.name = "rich";
  c.model.signal = {0.5, 0.2, 0.1};
  c.model.signal_support = 3;
  c.model.theta = -0.01;
  c.model.eps = 0.02;
  c.model.eps_list = {0.05, 0.01};
  c.model.K = 8;
  c.model.tau0 = 0.15;
  c.beta = 2.5;
  c.L = 3.0;
  c.weights.kind = WeightKind::Corrected;
  c.weights.gamma = 0.25;
  EstimatorConfig proj;
  proj.kind = "adaptive_contrast";
  WeightRecipe pr;
  pr.kind = WeightKind::Projection;
  pr.N = 3;
  proj.weights = pr;
  EstimatorConfig custom;
  custom.kind = "linearized_full";
  WeightRecipe cr;
  cr.kind = WeightKind::Custom;
  cr.values = {1.0, 0.5, 0.25};
  custom.weights = cr;
  c.estimators = {proj, custom, EstimatorConfig{"oracle_ml", std::nullopt}};
  c.mc.reps = 321;
  c.mc.seed = 18446744073709551615ULL;
  PriorConfig p;
  p.kind = "explicit";
  p.sigma2 = {0.0, 1e-4, 1e-5};
  p.eps_check = {1e-3, 1e-4};
  c.prior = p;
  c.class_rho = 0.01;
  c.class_c0 = 50.0;
  c.search.grid_points = 2048;
  c.search.refine_tol = 1e-12;
  c.tolerance.excess_lo = 0.25;
  c.output.directory = "somewhere";
  c.output.formats = {"json"};
  c.output.estimates = true;
  c.threads = 3;
  return c;
}

}  // namespace

TEST(Config, DefaultRoundTrip) {
  const ExperimentConfig c;
  EXPECT_EQ(parse_config(serialize_config(c)), c);
  EXPECT_EQ(parse_config("{}"), c);
}

TEST(Config, RichRoundTrip) {
  const ExperimentConfig c = rich_config();
  const ExperimentConfig back = parse_config(serialize_config(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_config(back), serialize_config(c));
}

TEST(Config, HashIgnoresWhitespaceAndKeyOrder) {
  const auto a = parse_config(R"({"experiment":"risk","mc":{"reps":500,"seed":3},"model":{"eps":0.1,"theta":0.0}})");
  const auto b = parse_config(R"({
      "model" : { "theta" : 0.0, "eps" : 0.1 },
      "mc"    : { "seed" : 3, "reps" : 500 },
      "experiment" : "risk" })");
  EXPECT_EQ(config_hash(a), config_hash(b));
  // Spelling out a default is the same configuration.
  const auto c = parse_config(R"({"experiment":"risk","mc":{"reps":500,"seed":3},"model":{"eps":0.1,"theta":0.0,"K":32}})");
  EXPECT_EQ(config_hash(a), config_hash(c));
}

TEST(Config, HashTracksMeaningfulFields) {
  const ExperimentConfig base = rich_config();
  const std::uint64_t h = config_hash(base);
  ExperimentConfig c = base;
  c.mc.reps += 1;
  EXPECT_NE(config_hash(c), h);
  c = base;
  c.model.eps_list[1] = 0.011;
  EXPECT_NE(config_hash(c), h);
  c = base;
  c.weights.gamma = 0.26;
  EXPECT_NE(config_hash(c), h);
  c = base;
  c.estimators.pop_back();
  EXPECT_NE(config_hash(c), h);
  c = base;
  c.prior->sigma2[1] = 2e-4;
  EXPECT_NE(config_hash(c), h);
  // Worker count and output location do not change results.
  c = base;
  c.threads = 7;
  c.output.directory = "elsewhere";
  EXPECT_EQ(config_hash(c), h);
}

TEST(Config, ErrorsNameTheField) {
  const auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const InvalidInput& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message(R"({"model":{"tau0":0.3}})").find("model.tau0"), std::string::npos);
  EXPECT_NE(message(R"({"model":{"tau0":0.3}})").find("1/4"), std::string::npos);
  EXPECT_NE(message(R"({"mc":{"reps":"many"}})").find("mc.reps"), std::string::npos);
  EXPECT_NE(message(R"({"mc":{"repz":5}})").find("mc.repz"), std::string::npos);
  EXPECT_NE(message(R"({"experiment":"bogus"})").find("bogus"), std::string::npos);
  EXPECT_NE(message(R"({"estimators":[{"kind":"nope"}]})").find("estimators[0].kind"), std::string::npos);
  EXPECT_NE(message(R"({"estimators":[{"kind":"oracle_ml","weights":{"kind":"pinsker"}}]})").find("estimators[0].weights"),
            std::string::npos);
  EXPECT_NE(message(R"({"weights":{"kind":"projection"}})").find("weights.N"), std::string::npos);
  EXPECT_NE(message(R"({"model":{"signal":[1,2,3],"K":2}})").find("model.K"), std::string::npos);
  EXPECT_NE(message(R"({"model":{"theta":0.3}})").find("theta"), std::string::npos);
  EXPECT_NE(message(R"({"ball":{"beta":1.0}})").find("ball"), std::string::npos);
  EXPECT_NE(message(R"({"prior":{"kind":"explicit"}})").find("prior.sigma2"), std::string::npos);
  EXPECT_NE(message("{not json"), "no error");
}

TEST(Config, Overrides) {
  json doc = json::parse(R"({"mc":{"reps":10},"estimators":[{"kind":"adaptive_contrast"}]})");
  apply_override(doc, "mc.reps=1000");
  apply_override(doc, "model.eps=0.01");
  apply_override(doc, "name=hello world");
  apply_override(doc, "estimators.0.kind=linearized_full");
  apply_override(doc, "model.eps_list=[0.1,0.05]");
  const ExperimentConfig c = config_from_json(doc);
  EXPECT_EQ(c.mc.reps, 1000);
  EXPECT_EQ(c.model.eps, 0.01);
  EXPECT_EQ(c.name, "hello world");
  EXPECT_EQ(c.estimators[0].kind, "linearized_full");
  EXPECT_EQ(c.model.eps_list, (std::vector<double>{0.1, 0.05}));
  EXPECT_THROW(apply_override(doc, "noequals"), InvalidInput);
  EXPECT_THROW(apply_override(doc, "estimators.5.kind=x"), InvalidInput);
  EXPECT_THROW(apply_override(doc, "mc.reps.deep=1"), InvalidInput);
}

TEST(Serialization, WeightSequenceRoundTrip) {
  const SobolevBall ball(2.0, 1.0);
  WeightRecipe r;
  r.kind = WeightKind::Corrected;
  r.gamma = 0.3;
  const WeightSequence h = build_weights(r, ball, 1e-4, 1);
  const json j = to_json(h);
  EXPECT_EQ(j["kind"], "corrected");
  EXPECT_EQ(j["parameters"]["gamma"], 0.3);
  EXPECT_EQ(weight_sequence_from_json(json::parse(j.dump())), h);
  const WeightSequence c = custom_weights({1.5, 0.3});
  EXPECT_EQ(weight_sequence_from_json(json::parse(to_json(c).dump())), c);
}

TEST(Serialization, EstimatorSpecRoundTrip) {
  const SignalSpectrum f({0.4, 0.1});
  const WeightSequence h = projection_weights(2, 3);
  const std::vector<EstimatorSpec> specs{OracleML{f},    AdaptiveContrast{h}, LinearizedFull{h},
                                         LocalKnown{f},  LocalNaive{h},       LocalCorrected{h},
                                         LinearizedOracle{h, f}};
  for (const EstimatorSpec& s : specs) {
    const EstimatorSpec back = estimator_spec_from_json(json::parse(to_json(s).dump()));
    EXPECT_EQ(back.index(), s.index());
    EXPECT_EQ(to_json(back), to_json(s));
  }
  EXPECT_THROW(estimator_spec_from_json(json{{"kind", "adaptive_contrast"}}), InvalidInput);
  EXPECT_THROW(estimator_spec_from_json(json{{"kind", "zzz"}}), InvalidInput);
}

TEST(Csv, QuotingAndNumbers) {
  CsvTable t({"a", "b"});
  t.add_comment("note");
  t.add_row({std::string("x,y"), 0.1});
  t.add_row({std::string("say \"hi\""), 1LL});
  t.add_row({std::string("line\nbreak"), -2.5e-300});
  EXPECT_EQ(t.str(), "# note\na,b\n\"x,y\",0.1\n\"say \"\"hi\"\"\",1\n\"line\nbreak\",-2.5e-300\n");
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_THROW(t.add_row({1.0}), InvalidInput);
  for (double x : {0.1, 1.0 / 3.0, 6.02214076e23, 5e-324, -0.0}) {
    EXPECT_EQ(std::strtod(format_double(x).c_str(), nullptr), x);
  }
}

TEST(Csv, AtomicWrite) {
  const auto dir = std::filesystem::temp_directory_path() / "shiftlab_csv_test";
  std::filesystem::remove_all(dir);
  const auto path = dir / "sub" / "out.csv";
  write_atomic(path, "a\n1\n");
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), "a\n1\n");
  for (const auto& e : std::filesystem::directory_iterator(path.parent_path())) {
    EXPECT_EQ(e.path().filename(), "out.csv");
  }
  std::filesystem::remove_all(dir);
}

TEST(Runner, EmptyEstimatorListGivesHeaderOnlyTables) {
  ExperimentConfig c;
  c.experiment = ExperimentKind::Risk;
  c.estimators.clear();
  c.mc.reps = 100;
  const ExperimentResult r = run_experiment(c, 1);
  EXPECT_EQ(r.tables.at("risk"), "estimator,model,eps,theta,mean_sq_normalized,std_err,reps,degenerate_count\n");
  EXPECT_EQ(r.plot.str(), "experiment,eps,estimator,metric,value,std_err\n");
  EXPECT_TRUE(r.reports.empty());
}

TEST(Runner, SweepHasOneRowPerEpsAndEstimator) {
  ExperimentConfig c;
  c.experiment = ExperimentKind::Sweep;
  c.model.signal = {0.5, 0.1};
  c.model.K = 4;
  c.model.eps_list = {0.1, 0.05, 0.02};
  c.weights.kind = WeightKind::Projection;
  c.weights.N = 2;
  c.estimators = {EstimatorConfig{"adaptive_contrast", std::nullopt}, EstimatorConfig{"local_corrected", std::nullopt}};
  c.mc.reps = 200;
  const ExperimentResult r = run_experiment(c, 2);
  EXPECT_EQ(r.reports.size(), 6u);
  EXPECT_EQ(CsvTable({"x"}).rows(), 0u);
  std::size_t lines = 0;
  for (char ch : r.tables.at("risk")) lines += ch == '\n';
  EXPECT_EQ(lines, 7u);
  const ExperimentResult again = run_experiment(c, 1);
  EXPECT_EQ(again.plot.str(), r.plot.str());
  EXPECT_EQ(again.summary_json(), r.summary_json());
}

TEST(Runner, Theorem1Columns) {
  ExperimentConfig c;
  c.experiment = ExperimentKind::VerifyTheorem1;
  c.model.signal = {0.5, 0.1};
  c.model.K = 4;
  c.model.eps_list = {0.01};
  c.weights.gamma = 0.3;
  c.mc.reps = 100;
  const ExperimentResult r = run_experiment(c, 1);
  const std::string& t = r.tables.at("theorem1");
  EXPECT_NE(t.find("eps,mc_risk,predicted,excess_ratio,std_err"), std::string::npos);
}

TEST(Runner, WeightsTableHeader) {
  const std::string t = detail::weights_table(SobolevBall(2.0, 1.0), 0.01, std::nullopt, 1);
  EXPECT_EQ(t.rfind("# W_eps=", 0), 0u);
  EXPECT_NE(t.find("k,q_k,lambda_star_k,s2_k\n"), std::string::npos);
}

TEST(Runner, LowerBoundReportsFloor) {
  ExperimentConfig c;
  c.experiment = ExperimentKind::LowerBound;
  c.model.eps = 0.05;
  c.estimators = {EstimatorConfig{"oracle_ml", std::nullopt}};
  c.mc.reps = 300;
  const ExperimentResult r = run_experiment(c, 1);
  ASSERT_EQ(r.reports.size(), 1u);
  EXPECT_TRUE(r.reports[0]["above_floor"].get<bool>());
  EXPECT_NE(r.tables.at("bounds").find("shrinkage_ratio"), std::string::npos);
}
