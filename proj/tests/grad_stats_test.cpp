#include "cabs/grad_stats.hpp"

#include <gtest/gtest.h>

#include <vector>

#include "cabs/rng.hpp"

namespace {

using cabs::SmoothedStats;
using cabs::VarianceEstimate;

// Per-example scalar gradients {1, 3}: q = (1 + 9)/2 = 5, g = 2, so the
// biased sample variance is 5 - 4 = 1.
TEST(SampleVariance, TwoExampleScalar) {
  const VarianceEstimate est = cabs::sample_variance({5.0}, {2.0});
  ASSERT_EQ(est.s.size(), 1u);
  EXPECT_DOUBLE_EQ(est.s[0], 1.0);
  EXPECT_DOUBLE_EQ(est.trace, 1.0);
}

TEST(SampleVariance, TraceIsL1NormOfCoordinates) {
  const VarianceEstimate est =
      cabs::sample_variance({5.0, 2.0, 1.0}, {2.0, 1.0, 1.0});
  EXPECT_DOUBLE_EQ(est.s[0], 1.0);
  EXPECT_DOUBLE_EQ(est.s[1], 1.0);
  EXPECT_DOUBLE_EQ(est.s[2], 0.0);
  EXPECT_DOUBLE_EQ(est.trace, 2.0);
}

// Cancellation can push q - g^2 a hair negative; the estimate clamps at 0.
TEST(SampleVariance, NegativeCancellationClampsToZero) {
  const double g = 1.0 + 1e-8;
  const VarianceEstimate est = cabs::sample_variance({g * g - 1e-18}, {g});
  EXPECT_GE(est.s[0], 0.0);
  EXPECT_DOUBLE_EQ(est.s[0], 0.0);
  EXPECT_DOUBLE_EQ(est.trace, 0.0);
}

TEST(SampleVariance, DimensionMismatchThrows) {
  EXPECT_THROW(cabs::sample_variance({1.0, 2.0}, {1.0}),
               std::invalid_argument);
}

// Reordering the per-example gradients leaves q and g unchanged, hence S.
// Exactly representable values so the comparison can be bitwise.
TEST(SampleVariance, PermutationInvariance) {
  const std::vector<double> grads = {0.5, -1.25, 2.0, 0.25};
  const std::vector<double> perm = {2.0, 0.25, 0.5, -1.25};
  auto stats = [](const std::vector<double>& xs) {
    double q = 0.0, g = 0.0;
    for (double x : xs) {
      q += x * x;
      g += x;
    }
    return std::pair<double, double>{q / 4.0, g / 4.0};
  };
  const auto [q1, g1] = stats(grads);
  const auto [q2, g2] = stats(perm);
  ASSERT_EQ(q1, q2);
  ASSERT_EQ(g1, g2);
  EXPECT_EQ(cabs::sample_variance({q1}, {g1}).s[0],
            cabs::sample_variance({q2}, {g2}).s[0]);
}

TEST(BesselCorrect, RescalesByMOverMMinusOne) {
  VarianceEstimate est = cabs::sample_variance({5.0}, {2.0});
  est = cabs::bessel_correct(est, 2);
  EXPECT_DOUBLE_EQ(est.s[0], 2.0);
  EXPECT_DOUBLE_EQ(est.trace, 2.0);
  EXPECT_THROW(cabs::bessel_correct(est, 1), std::invalid_argument);
}

// Monte Carlo check of the bias law E[S] = (m-1)/m sigma^2 at m = 4.
TEST(SampleVariance, BiasLawMonteCarlo) {
  cabs::Rng rng(31604);
  const std::size_t m = 4, trials = 20000;
  double mean_s = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    double q = 0.0, g = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double x = rng.normal();
      q += x * x / double(m);
      g += x / double(m);
    }
    mean_s += cabs::sample_variance({q}, {g}).s[0];
  }
  mean_s /= double(trials);
  EXPECT_NEAR(mean_s, 0.75, 0.75 * 0.02);
}

// mu = 0.95, zero state, trace sample 1 -> 0.05 exactly.
TEST(UpdateEma, FirstSample) {
  SmoothedStats stats;
  stats = cabs::update_ema(stats, 2.0, 1.0);
  EXPECT_DOUBLE_EQ(stats.xi, (1.0 - 0.95) * 1.0);
  EXPECT_DOUBLE_EQ(stats.f_avg, (1.0 - 0.95) * 2.0);
}

TEST(UpdateEma, MuZeroTracksTheSample) {
  SmoothedStats stats;
  stats.mu = 0.0;
  stats.xi = 123.0;
  stats.f_avg = -5.0;
  stats = cabs::update_ema(stats, 0.25, 7.0);
  EXPECT_DOUBLE_EQ(stats.xi, 7.0);
  EXPECT_DOUBLE_EQ(stats.f_avg, 0.25);
}

TEST(UpdateEma, RejectsMuOutsideUnitInterval) {
  SmoothedStats stats;
  stats.mu = 1.0;
  EXPECT_THROW(cabs::update_ema(stats, 1.0, 1.0), std::invalid_argument);
  stats.mu = -0.1;
  EXPECT_THROW(cabs::update_ema(stats, 1.0, 1.0), std::invalid_argument);
}

// Zero-init EMA fed a constant c approaches c from below as c (1 - mu^k).
TEST(UpdateEma, GeometricApproachToConstantInput) {
  SmoothedStats stats;
  const double c = 3.0;
  for (int k = 1; k <= 50; ++k) {
    stats = cabs::update_ema(stats, c, c);
    const double expected = c * (1.0 - std::pow(0.95, k));
    EXPECT_NEAR(stats.xi, expected, 1e-12);
    EXPECT_LT(stats.xi, c);
  }
}

// If every observed trace lies in [a, b], the EMA never leaves
// [min(xi0, a), max(xi0, b)].
TEST(UpdateEma, MonotoneSmoothingStaysInObservedRange) {
  cabs::Rng rng(99081);
  SmoothedStats stats;  // xi0 = 0
  const double a = 2.0, b = 5.0;
  for (int k = 0; k < 500; ++k) {
    stats = cabs::update_ema(stats, 1.0, rng.uniform_in(a, b));
    EXPECT_GE(stats.xi, 0.0);
    EXPECT_LE(stats.xi, b);
  }
  // after warm-up the EMA also clears the lower edge's floor effect
  EXPECT_GT(stats.xi, a * 0.99);
}

}  // namespace
