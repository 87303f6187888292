#include "cabs/validation.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <string>
#include <vector>

namespace {

using cabs::GainModel;

GainModel make_gain(double alpha, double lipschitz, double gsq, double trace) {
  GainModel gm;
  gm.alpha = alpha;
  gm.lipschitz = lipschitz;
  gm.grad_norm_sq = gsq;
  gm.trace = trace;
  return gm;
}

TEST(ExpectedGain, WorkedExample) {
  // (1 - 1/2) * 3 - (1/2 / 2) * 1 = 1.5 - 0.25
  EXPECT_DOUBLE_EQ(cabs::expected_gain(make_gain(1.0, 1.0, 3.0, 1.0), 2),
                   1.25);
}

TEST(ExpectedGain, GrowsTowardTheNoiseFreeLimit) {
  // at alpha = 1/L the noise-free gain is gsq / (2 L); huge batches approach it
  const GainModel gm = make_gain(0.25, 4.0, 5.0, 7.0);
  const double limit = 5.0 / (2.0 * 4.0);
  EXPECT_NEAR(cabs::expected_gain(gm, 1000000000000LL), limit, 1e-9 * limit);
  EXPECT_LT(cabs::expected_gain(gm, 4), cabs::expected_gain(gm, 8));
  EXPECT_LT(cabs::expected_gain(gm, 8), limit);
}

TEST(ExpectedGain, RejectsBadInputs) {
  EXPECT_THROW(cabs::expected_gain(make_gain(0.0, 1.0, 1.0, 1.0), 2),
               std::invalid_argument);
  EXPECT_THROW(cabs::expected_gain(make_gain(1.0, 1.0, -1.0, 1.0), 2),
               std::invalid_argument);
  EXPECT_THROW(cabs::expected_gain(make_gain(1.0, 1.0, 1.0, 1.0), 0),
               std::invalid_argument);
}

TEST(BruteForceOptimalBatch, FindsTheClosedFormOptimum) {
  // with L = alpha = 1 the gain-per-example optimum is 2 * trace / gsq = 4
  EXPECT_EQ(cabs::brute_force_optimal_batch(make_gain(1.0, 1.0, 1.0, 2.0), 1,
                                            1000),
            4);
}

TEST(BruteForceOptimalBatch, TiesResolveToTheSmallerBatch) {
  // gsq = 14, trace = 24: U(3) = U(4) = 1 exactly in floating point
  const GainModel gm = make_gain(1.0, 1.0, 14.0, 24.0);
  EXPECT_DOUBLE_EQ(cabs::expected_gain(gm, 3) / 3.0, 1.0);
  EXPECT_DOUBLE_EQ(cabs::expected_gain(gm, 4) / 4.0, 1.0);
  EXPECT_EQ(cabs::brute_force_optimal_batch(gm, 1, 100), 3);
}

TEST(BruteForceOptimalBatch, InfeasibleStepSizeThrows) {
  EXPECT_THROW(
      cabs::brute_force_optimal_batch(make_gain(2.5, 1.0, 1.0, 1.0), 1, 100),
      cabs::infeasible_step_error);
  EXPECT_THROW(
      cabs::brute_force_optimal_batch(make_gain(0.1, 1.0, 1.0, 1.0), 5, 4),
      std::invalid_argument);
}

TEST(DescentDirection, CloseEstimateImpliesPositiveInner) {
  const auto chk = cabs::descent_direction_check({1.0, 0.0}, {1.0, 0.1});
  EXPECT_TRUE(chk.g_is_close);
  EXPECT_DOUBLE_EQ(chk.inner, 1.0);
  EXPECT_TRUE(chk.implication_holds());
}

TEST(DescentDirection, FarEstimateMakesNoClaim) {
  // opposite gradients: not within the ball, so the implication is vacuous
  const auto chk = cabs::descent_direction_check({1.0, 0.0}, {-1.0, 0.0});
  EXPECT_FALSE(chk.g_is_close);
  EXPECT_DOUBLE_EQ(chk.inner, -1.0);
  EXPECT_TRUE(chk.implication_holds());
}

TEST(DescentDirection, DimensionMismatchThrows) {
  EXPECT_THROW(cabs::descent_direction_check({1.0}, {1.0, 2.0}),
               std::invalid_argument);
}

TEST(PerExampleLoop, WorkedExample) {
  cabs::Matrix a(2, 2), dz(2, 1);
  a(0, 0) = 1.0; a(0, 1) = 2.0;
  a(1, 0) = 3.0; a(1, 1) = 4.0;
  dz(0, 0) = 1.0;
  dz(1, 0) = -1.0;
  // example gradients (1, 2) and (-3, -4); squares sum to (10, 20)
  const cabs::Matrix out = cabs::per_example_second_moment_loop(a, dz);
  ASSERT_EQ(out.rows, 2u);
  ASSERT_EQ(out.cols, 1u);
  EXPECT_DOUBLE_EQ(out(0, 0), 10.0);
  EXPECT_DOUBLE_EQ(out(1, 0), 20.0);
}

TEST(FiniteDiffGradient, RejectsNonPositiveEps) {
  cabs::ModelSpec model;
  model.kind = cabs::ModelKind::logistic_regression;
  model.layers = {2, 2};
  const cabs::Dataset ds = cabs::generate_gaussian_blobs(2, 2, 4, 1.0, 1);
  EXPECT_THROW(cabs::finite_diff_gradient(model, std::vector<double>(6, 0.0),
                                          {0, 1}, ds, 0.0),
               std::invalid_argument);
}

TEST(VarianceBiasCheck, SmallErrorAtModerateBatch) {
  const auto rel = cabs::variance_bias_check({1.0, 0.5}, 16, 4000, 52);
  ASSERT_EQ(rel.size(), 2u);
  EXPECT_LT(rel[0], 0.05);
  EXPECT_LT(rel[1], 0.05);
}

TEST(VarianceBiasCheck, RejectsBadArguments) {
  EXPECT_THROW(cabs::variance_bias_check({1.0}, 1, 10, 0),
               std::invalid_argument);
  EXPECT_THROW(cabs::variance_bias_check({1.0}, 4, 0, 0),
               std::invalid_argument);
  EXPECT_THROW(cabs::variance_bias_check({0.0}, 4, 10, 0),
               std::invalid_argument);
}

TEST(ConvexityBoundCheck, ScalarIdentityHoldsExactly) {
  const auto spec = cabs::make_scalar_quadratic(2.0, {1.0, 2.0}, 0.5,
                                                {1.0, 1.0});
  // at w - w* = (1, 2): gap = 5, |grad|^2 = h^2 * 5 = 20 = 2 h gap
  const auto chk = cabs::convexity_bound_check(spec, {2.0, 4.0});
  EXPECT_TRUE(chk.scalar_identity_ok);
  EXPECT_TRUE(chk.strong_convexity_ok);
}

TEST(ConvexityBoundCheck, FullHessianBoundHolds) {
  cabs::QuadraticOracleSpec spec;
  spec.hessian = cabs::Matrix(2, 2);
  spec.hessian(0, 0) = 1.0;
  spec.hessian(1, 1) = 3.0;
  spec.w_star = {0.0, 0.0};
  spec.f_star = 0.0;
  spec.sigma_sq = {1.0, 1.0};
  spec.mu_sc = 1.0;
  spec.lipschitz = 3.0;
  // at (1, 1): |grad|^2 = 10, gap = 2, bound = 2 * mu * gap = 4
  const auto chk = cabs::convexity_bound_check(spec, {1.0, 1.0});
  EXPECT_TRUE(chk.scalar_identity_ok);  // vacuous for a full Hessian
  EXPECT_TRUE(chk.strong_convexity_ok);
}

TEST(DebiasedGradNorm, DiagnosticValueAndSign) {
  EXPECT_DOUBLE_EQ(cabs::debiased_grad_norm_sq(10.0, 4.0, 2), 8.0);
  // the correction can legitimately push the estimate negative
  EXPECT_DOUBLE_EQ(cabs::debiased_grad_norm_sq(1.0, 10.0, 2), -4.0);
  EXPECT_THROW(cabs::debiased_grad_norm_sq(1.0, 1.0, 0),
               std::invalid_argument);
}

TEST(RandomOrthogonal, ColumnsAreOrthonormal) {
  cabs::Rng rng(88);
  const cabs::Matrix q = cabs::random_orthogonal(6, rng);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < 6; ++k) dot += q(k, i) * q(k, j);
      EXPECT_NEAR(dot, i == j ? 1.0 : 0.0, 1e-10);
    }
  }
}

TEST(RandomPsdQuadratic, EigenvalueBoundsHoldForRayleighQuotients) {
  cabs::Rng rng(99);
  const auto spec = cabs::random_psd_quadratic(5, rng);
  spec.validate();
  EXPECT_LE(spec.mu_sc, spec.lipschitz);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_NEAR(spec.hessian(i, j), spec.hessian(j, i), 1e-12);
    }
  }
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(5);
    double vv = 0.0;
    for (double& x : v) {
      x = rng.normal();
    }
    for (double x : v) vv += x * x;
    double vhv = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 5; ++j) {
        vhv += v[i] * spec.hessian(i, j) * v[j];
      }
    }
    const double rayleigh = vhv / vv;
    EXPECT_GE(rayleigh, spec.mu_sc * (1.0 - 1e-9));
    EXPECT_LE(rayleigh, spec.lipschitz * (1.0 + 1e-9));
  }
}

TEST(ValidationSuites, AllChecksPassAtThePinnedSeed) {
  const auto results = cabs::run_validation_suites(20240906);
  const std::vector<std::string> expected = {
      "gradient_finite_difference", "fused_vs_loop", "variance_bias",
      "gain_argmax", "descent_direction", "convexity_bounds",
      "gain_sign_boundary", "oracle_rule_identity", "rescaling_invariance"};
  ASSERT_EQ(results.size(), expected.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    EXPECT_EQ(results[i].name, expected[i]);
    EXPECT_TRUE(results[i].pass) << results[i].name << " " << results[i].detail;
    EXPECT_FALSE(results[i].detail.empty());
  }
}

}  // namespace
