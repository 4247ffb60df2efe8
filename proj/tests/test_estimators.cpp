#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "shiftlab/errors.hpp"
#include "shiftlab/estimators.hpp"
#include "shiftlab/rng.hpp"
#include "shiftlab/signal_model.hpp"
#include "shiftlab/weights.hpp"

using namespace shiftlab;

namespace {

SequenceObservation observe(const SignalSpectrum& f, double theta, double eps, int K, std::uint64_t rep,
                            ModelKind kind = ModelKind::Full) {
  RandomStream rng(2024, rep, 0);
  return simulate(f, theta, eps, K, kind, rng);
}

std::vector<double> col_a(const SequenceObservation& o) {
  std::vector<double> v;
  for (const auto& p : o.pairs) v.push_back(p.a);
  return v;
}

std::vector<double> col_b(const SequenceObservation& o) {
  std::vector<double> v;
  for (const auto& p : o.pairs) v.push_back(p.b);
  return v;
}

const SignalSpectrum kSignal({0.6, -0.3, 0.15, 0.05, -0.02, 0.01});

}  // namespace

TEST(Estimators, NamesAndModels) {
  const WeightSequence h = projection_weights(2, 4);
  EXPECT_EQ(estimator_name(AdaptiveContrast{h}), "adaptive_contrast");
  EXPECT_EQ(estimator_label(AdaptiveContrast{h}), "adaptive_contrast[projection]");
  EXPECT_EQ(estimator_label(OracleML{kSignal}), "oracle_ml");
  EXPECT_EQ(required_model(LocalNaive{h}), ModelKind::Local);
  EXPECT_EQ(required_model(LinearizedFull{h}), ModelKind::Full);
  EXPECT_TRUE(is_oracle(LinearizedOracle{h, kSignal}));
  EXPECT_FALSE(is_oracle(LocalCorrected{h}));
}

TEST(Contrast, MatchesOracleAndIsPeriodic) {
  const auto obs = observe(kSignal, 0.07, 0.05, 8, 1);
  const WeightSequence h = custom_weights({1.0, 0.8, 0.5, 0.3, 0.2, 0.1});
  for (double tau : {-0.2, -0.03, 0.0, 0.11, 0.19}) {
    EXPECT_NEAR(contrast(obs, h, tau), static_cast<double>(oracle::contrast(col_a(obs), col_b(obs), h.values, tau)),
                1e-13);
    EXPECT_NEAR(contrast(obs, h, tau), contrast(obs, h, tau + 1.0), 1e-12);
  }
}

TEST(Contrast, DerivativeMatchesFiniteDifference) {
  const auto obs = observe(kSignal, -0.04, 0.1, 8, 2);
  const WeightSequence h = custom_weights({1.0, 0.9, 0.7, 0.4, 0.2, 0.1});
  for (double tau : {-0.17, -0.05, 0.0, 0.08, 0.2}) {
    const double d = 1e-6;
    const double fd = (contrast(obs, h, tau + d) - contrast(obs, h, tau - d)) / (2 * d);
    EXPECT_NEAR(contrast_derivative(obs, h, tau), fd, 1e-6 * (1 + std::abs(fd)));
  }
}

TEST(Contrast, WeightsBeyondTruncationRejected) {
  const auto obs = observe(kSignal, 0.0, 0.1, 6, 3);
  EXPECT_THROW(contrast(obs, projection_weights(7, 7), 0.0), InvalidInput);
  const auto local = observe(kSignal, 0.0, 0.1, 6, 3, ModelKind::Local);
  EXPECT_THROW(contrast(local, projection_weights(2, 6), 0.0), InvalidInput);
}

TEST(AdaptiveContrast, GridSearchMatchesDenseOracle) {
  const ParamDomain dom(0.2);
  const WeightSequence h = custom_weights({1.0, 0.9, 0.7, 0.4, 0.2, 0.1});
  for (int r = 0; r < 40; ++r) {
    const double theta = -0.15 + 0.3 * (r / 39.0);
    const auto obs = observe(kSignal, theta, 0.15, 8, 100 + static_cast<std::uint64_t>(r));
    const double est = estimate(AdaptiveContrast{h}, obs, dom);
    const auto a = col_a(obs), b = col_b(obs);
    const auto g = [&](long double t) { return oracle::contrast(a, b, h.values, t); };
    const double ref = static_cast<double>(oracle::dense_argmax(g, -0.2L, 0.2L, 20000));
    EXPECT_GE(contrast(obs, h, est), static_cast<double>(g(ref)) - 1e-12) << r;
    EXPECT_NEAR(est, ref, 1e-7) << r;
  }
}

TEST(AdaptiveContrast, NoiselessRecovery) {
  const ParamDomain dom(0.2);
  RandomStream rng(77);
  for (int t = 0; t < 50; ++t) {
    const double theta = -0.2 + 0.4 * rng.next_uniform();
    const auto obs = observe(kSignal, theta, 0.0, 6, 0);
    EXPECT_NEAR(estimate(AdaptiveContrast{projection_weights(1, 6)}, obs, dom), theta, 1e-8);
    EXPECT_NEAR(estimate(AdaptiveContrast{projection_weights(6, 6)}, obs, dom), theta, 1e-8);
    EXPECT_NEAR(estimate(OracleML{kSignal}, obs, dom), theta, 1e-8);
  }
}

TEST(AdaptiveContrast, ShiftEquivariance) {
  const ParamDomain dom(0.2);
  const WeightSequence h = custom_weights({1.0, 0.8, 0.5, 0.3});
  for (int r = 0; r < 20; ++r) {
    const auto obs = observe(kSignal, 0.0, 0.03, 6, 300 + static_cast<std::uint64_t>(r));
    const double base = estimate(AdaptiveContrast{h}, obs, dom);
    for (double delta : {-0.06, 0.04, 0.09}) {
      const double moved = estimate(AdaptiveContrast{h}, shift_observation(obs, delta), dom);
      EXPECT_NEAR(moved, base + delta, 1e-8) << r << " " << delta;
    }
  }
}

TEST(AdaptiveContrast, ClampedToDomain) {
  const ParamDomain dom(0.05);
  const auto obs = observe(kSignal, 0.2, 0.0, 6, 0);
  const double est = estimate(AdaptiveContrast{projection_weights(1, 6)}, obs, dom);
  EXPECT_LE(std::abs(est), 0.05);
  EXPECT_NEAR(est, 0.05, 1e-12);
}

TEST(LinearizedFull, CloseToContrastMaximizerNearZero) {
  // At theta = 0 the linearization error is second order in the noise.
  const ParamDomain dom(0.2);
  const WeightSequence h = custom_weights({1.0, 0.7, 0.3});
  double diff_big = 0.0, diff_small = 0.0;
  for (int r = 0; r < 200; ++r) {
    const auto big = observe(kSignal, 0.0, 1e-2, 6, 500 + static_cast<std::uint64_t>(r));
    const auto small = observe(kSignal, 0.0, 1e-3, 6, 500 + static_cast<std::uint64_t>(r));
    diff_big += std::abs(estimate(LinearizedFull{h}, big, dom) - estimate(AdaptiveContrast{h}, big, dom));
    diff_small += std::abs(estimate(LinearizedFull{h}, small, dom) - estimate(AdaptiveContrast{h}, small, dom));
  }
  EXPECT_GT(diff_big / diff_small, 30.0);
  const auto clean = observe(kSignal, 0.0, 0.0, 6, 0);
  EXPECT_NEAR(estimate(LinearizedFull{h}, clean, dom), 0.0, 1e-15);
}

TEST(LocalEstimators, NoiselessExact) {
  const ParamDomain dom(0.2);
  const auto obs = observe(kSignal, 0.13, 0.0, 6, 0, ModelKind::Local);
  const WeightSequence one = projection_weights(6, 6);
  EXPECT_NEAR(estimate(LocalKnown{kSignal}, obs, dom), 0.13, 1e-14);
  EXPECT_NEAR(estimate(LocalNaive{one}, obs, dom), 0.13, 1e-14);
  EXPECT_NEAR(estimate(LocalCorrected{one}, obs, dom), 0.13, 1e-14);
}

TEST(LocalEstimators, DegenerateDenominatorFlagged) {
  const ParamDomain dom(0.2);
  SequenceObservation obs;
  obs.kind = ModelKind::Local;
  obs.eps = 1.0;
  obs.pairs = {{0.1, 0.5}};
  const WeightSequence h = projection_weights(1, 1);
  const Estimate e = try_estimate(LocalCorrected{h}, obs, dom);
  EXPECT_TRUE(e.degenerate);
  EXPECT_LE(std::abs(e.value), 0.2);
  EXPECT_LT(e.raw, 0.0);
  EXPECT_THROW(estimate(LocalCorrected{h}, obs, dom), DegenerateEstimate);
  obs.pairs = {{0.0, 0.0}};
  const Estimate z = try_estimate(LocalNaive{h}, obs, dom);
  EXPECT_TRUE(z.degenerate);
  EXPECT_EQ(z.value, 0.0);
}

TEST(LocalEstimators, RejectFullObservation) {
  const auto obs = observe(kSignal, 0.0, 0.1, 6, 1);
  EXPECT_THROW(estimate(LocalNaive{projection_weights(1, 6)}, obs, ParamDomain(0.2)), InvalidInput);
  EXPECT_THROW(estimate(AdaptiveContrast{projection_weights(1, 6)}, observe(kSignal, 0.0, 0.1, 6, 1, ModelKind::Local),
                        ParamDomain(0.2)),
               InvalidInput);
}

TEST(LinearizedOracle, MatchesDirectFormula) {
  const WeightSequence h = custom_weights({1.0, 0.6, 0.3, 0.1});
  const double theta = 0.06, eps = 0.04;
  const auto obs = observe(kSignal, theta, eps, 6, 9);
  long double l0 = 0, el1 = 0;
  for (int k = 1; k <= 4; ++k) {
    const long double c = std::cos(oracle::w(k) * theta), s = std::sin(oracle::w(k) * theta);
    const long double xi = (obs.at(k).a * c + obs.at(k).b * s - kSignal.coeff(k)) / eps;
    const long double xs = (obs.at(k).b * c - obs.at(k).a * s) / eps;
    l0 += h.at(k) * oracle::w(k) * (eps * kSignal.coeff(k) * xs + eps * eps * xs * xi);
    el1 += h.at(k) * oracle::w(k) * oracle::w(k) * kSignal.coeff(k) * kSignal.coeff(k);
  }
  EXPECT_NEAR(linearized_oracle(obs, h, kSignal), static_cast<double>(theta + l0 / el1), 1e-14);
  SequenceObservation no_truth = obs;
  no_truth.theta_true.reset();
  EXPECT_THROW(linearized_oracle(no_truth, h, kSignal), InvalidInput);
  EXPECT_THROW(linearized_oracle(observe(kSignal, theta, 0.0, 6, 9), h, kSignal), InvalidInput);
}

TEST(LinearizedOracle, ClosedFormRisk) {
  const WeightSequence h = custom_weights({1.0, 0.6, 0.3});
  const double eps = 0.05;
  long double num = 0, den = 0;
  for (int k = 1; k <= 6; ++k) {
    const long double hk = h.at(k), fk = kSignal.coeff(k), w2 = oracle::w(k) * oracle::w(k);
    num += hk * hk * w2 * (fk * fk + eps * eps);
    den += hk * w2 * fk * fk;
  }
  const std::vector<double> c(kSignal.coeffs().begin(), kSignal.coeffs().end());
  EXPECT_NEAR(closed_form_risk_linearized(kSignal, h, eps), static_cast<double>(oracle::deriv_norm(c) * num / (den * den)),
              1e-12);
  EXPECT_THROW(closed_form_risk_linearized(SignalSpectrum({0.0}), h, eps), DegenerateEstimate);
}

TEST(Derivative, SignalDerivativeMatchesFiniteDifference) {
  for (double u : {-0.4, -0.1, 0.0, 0.23, 0.49}) {
    const double d = 1e-6;
    const double fd = (eval_signal(kSignal, u + d) - eval_signal(kSignal, u - d)) / (2 * d);
    EXPECT_NEAR(signal_derivative(kSignal, u), fd, 1e-6);
  }
}

TEST(Derivative, NoiselessEstimateIsExactWithUnitWeights) {
  const auto obs = observe(kSignal, 0.05, 0.0, 6, 0);
  for (double u : {-0.3, 0.0, 0.17}) {
    EXPECT_NEAR(derivative_estimate(obs, projection_weights(6, 6), 0.05, u), signal_derivative(kSignal, u), 1e-12);
  }
  EXPECT_NEAR(derivative_mise(kSignal, projection_weights(6, 6), 0.0), 0.0, 1e-15);
}

TEST(SearchOptions, GridResolution) {
  SearchOptions o;
  EXPECT_EQ(o.resolved_grid(10), 1024);
  EXPECT_EQ(o.resolved_grid(100), 1600);
  o.grid_points = 50;
  EXPECT_EQ(o.resolved_grid(100), 50);
}
