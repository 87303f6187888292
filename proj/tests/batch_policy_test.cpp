#include "cabs/batch_policy.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace {

using cabs::BatchSizePolicy;
using cabs::PolicyInputs;
using cabs::PolicyKind;

TEST(CabsRule, WorkedValues) {
  // alpha * xi / F_avg
  EXPECT_DOUBLE_EQ(cabs::cabs_batch_size(0.01, 3200.0, 2.0), 16.0);
  EXPECT_DOUBLE_EQ(cabs::cabs_batch_size(0.1, 1000.0, 0.5), 200.0);
}

TEST(CabsRule, DenominatorFloorKicksInNearZeroLoss) {
  const double m = cabs::cabs_batch_size(0.1, 10.0, 0.0);
  EXPECT_DOUBLE_EQ(m, 0.1 * 10.0 / 1e-8);
}

TEST(CabsRule, ZeroTraceGivesZero) {
  EXPECT_DOUBLE_EQ(cabs::cabs_batch_size(0.1, 0.0, 2.0), 0.0);
}

// Pre-round the rule is exactly linear in alpha (doubling alpha doubles m).
TEST(CabsRule, ExactAlphaLinearity) {
  const double xi = 137.25, f = 0.625;
  for (double alpha : {0.01, 0.1, 0.3}) {
    EXPECT_DOUBLE_EQ(cabs::cabs_batch_size(2.0 * alpha, xi, f),
                     2.0 * cabs::cabs_batch_size(alpha, xi, f));
  }
}

// At fixed xi the chosen size is inversely proportional to the loss level.
TEST(CabsRule, InverselyProportionalToSmoothedLoss) {
  const double alpha = 0.1, xi = 640.0;
  const double base = cabs::cabs_batch_size(alpha, xi, 2.0) * 2.0;
  for (double f : {0.25, 0.5, 1.0, 4.0, 8.0}) {
    EXPECT_NEAR(cabs::cabs_batch_size(alpha, xi, f) * f, base, 1e-9 * base);
  }
}

TEST(CabsWithFstarRule, WorkedValue) {
  // alpha * xi / (F_avg - F*)
  EXPECT_DOUBLE_EQ(cabs::cabs_with_fstar_batch_size(0.1, 100.0, 2.0, 1.0),
                   10.0);
}

TEST(NoisyGradNormRule, WorkedValues) {
  // trace / (theta^2 |g|^2)
  EXPECT_DOUBLE_EQ(cabs::noisy_grad_norm_batch_size(1.0, 4.0, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(cabs::noisy_grad_norm_batch_size(0.5, 4.0, 1.0), 16.0);
}

TEST(LipschitzOracleRule, WorkedValues) {
  // (2 L alpha / (2 - L alpha)) * trace / |grad F|^2
  EXPECT_DOUBLE_EQ(cabs::lipschitz_oracle_batch_size(1.0, 1.0, 6.0, 3.0), 4.0);
  // L alpha = 1 gives exactly 2 * trace / gsq
  EXPECT_DOUBLE_EQ(cabs::lipschitz_oracle_batch_size(2.0, 0.5, 7.0, 7.0), 2.0);
}

TEST(LipschitzOracleRule, InfeasibleStepThrows) {
  EXPECT_THROW(cabs::lipschitz_oracle_batch_size(1.0, 2.0, 1.0, 1.0),
               cabs::infeasible_step_error);
  EXPECT_THROW(cabs::lipschitz_oracle_batch_size(4.0, 0.6, 1.0, 1.0),
               cabs::infeasible_step_error);
}

TEST(GeometricRule, WorkedValuesAndConstruction) {
  EXPECT_DOUBLE_EQ(cabs::geometric_batch_size(0, 16, 1.1), 16.0);
  EXPECT_NEAR(cabs::geometric_batch_size(1, 16, 1.1), 17.6, 1e-12);
  EXPECT_EQ(cabs::round_and_clip(cabs::geometric_batch_size(1, 16, 1.1), 2,
                                 4096),
            18);
  EXPECT_THROW(cabs::geometric_batch_size(1, 16, 1.0), std::invalid_argument);
}

TEST(RoundAndClip, HalfAwayFromZeroThenClamp) {
  EXPECT_EQ(cabs::round_and_clip(16.4, 16, 4096), 16);
  EXPECT_EQ(cabs::round_and_clip(16.5, 16, 4096), 17);
  EXPECT_EQ(cabs::round_and_clip(3.0, 16, 4096), 16);
  EXPECT_EQ(cabs::round_and_clip(1e9, 16, 4096), 4096);
  EXPECT_EQ(cabs::round_and_clip(17.5, 16, 4096), 18);
  EXPECT_EQ(cabs::round_and_clip(0.0, 16, 4096), 16);
}

TEST(RoundAndClip, SaturatesOnNonFinite) {
  EXPECT_EQ(cabs::round_and_clip(std::numeric_limits<double>::infinity(), 16,
                                 4096),
            4096);
  EXPECT_EQ(cabs::round_and_clip(std::nan(""), 16, 4096), 16);
}

// Scaling (F, alpha) -> (c F, alpha / c) rescales xi by c^2 and leaves the
// rounded size unchanged on ordinary values.
TEST(CabsRule, RescalingInvarianceOnGrid) {
  for (double alpha : {0.01, 0.1, 0.5}) {
    for (double xi : {1.0, 64.0, 1234.5, 1e5}) {
      for (double f : {0.05, 0.7, 2.0, 9.5}) {
        const long long base = cabs::round_and_clip(
            cabs::cabs_batch_size(alpha, xi, f), 2, 1 << 30);
        for (double c : {0.1, 10.0}) {
          const long long scaled = cabs::round_and_clip(
              cabs::cabs_batch_size(alpha / c, c * c * xi, c * f), 2, 1 << 30);
          EXPECT_EQ(scaled, base) << "alpha=" << alpha << " xi=" << xi
                                  << " f=" << f << " c=" << c;
        }
      }
    }
  }
}

// More noise -> never a smaller batch; higher loss -> never a larger one.
TEST(Rules, MonotoneInNoiseAndDenominator) {
  double prev = 0.0;
  for (double xi : {0.0, 1.0, 10.0, 100.0, 1000.0}) {
    const double m = cabs::cabs_batch_size(0.1, xi, 0.8);
    EXPECT_GE(m, prev);
    prev = m;
  }
  prev = 1e300;
  for (double f : {0.1, 0.5, 1.0, 5.0}) {
    const double m = cabs::cabs_batch_size(0.1, 50.0, f);
    EXPECT_LE(m, prev);
    prev = m;
  }
  prev = 1e300;
  for (double gsq : {0.01, 0.1, 1.0, 10.0}) {
    const double m = cabs::noisy_grad_norm_batch_size(0.8, 50.0, gsq);
    EXPECT_LE(m, prev);
    prev = m;
  }
}

TEST(BatchSizePolicy, ConstructionValidation) {
  BatchSizePolicy p;
  p.kind = PolicyKind::cabs;
  p.m_min = 1;  // variance needs at least 2 examples
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.m_min = 16;
  p.m_max = 8;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.m_max = 4096;
  EXPECT_NO_THROW(p.validate());

  p.kind = PolicyKind::noisy_grad_norm;
  p.theta = 1.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.theta = 0.8;
  EXPECT_NO_THROW(p.validate());

  p.kind = PolicyKind::lipschitz_oracle;
  p.lipschitz = 1.0;
  p.alpha = 2.0;
  EXPECT_THROW(p.validate(), cabs::infeasible_step_error);
  p.alpha = 0.5;
  EXPECT_NO_THROW(p.validate());

  p.kind = PolicyKind::geometric;
  p.rho = 1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.rho = 1.05;
  p.m0 = 4;  // below m_min
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(TargetBatchSize, DispatchesPerKind) {
  PolicyInputs in;
  in.xi = 1000.0;
  in.f_avg = 0.5;
  in.grad_norm_sq_avg = 4.0;
  in.exact_grad_norm_sq = 2.0;
  in.step = 3;

  BatchSizePolicy p;
  p.alpha = 0.1;
  p.kind = PolicyKind::constant;
  p.m_const = 48;
  EXPECT_DOUBLE_EQ(cabs::target_batch_size(p, in), 48.0);

  p.kind = PolicyKind::cabs;
  EXPECT_DOUBLE_EQ(cabs::target_batch_size(p, in), 200.0);

  p.kind = PolicyKind::cabs_with_fstar;
  p.f_star = 0.25;
  EXPECT_DOUBLE_EQ(cabs::target_batch_size(p, in), 0.1 * 1000.0 / 0.25);

  p.kind = PolicyKind::noisy_grad_norm;
  p.theta = 0.5;
  EXPECT_DOUBLE_EQ(cabs::target_batch_size(p, in), 1000.0 / (0.25 * 4.0));

  p.kind = PolicyKind::lipschitz_oracle;
  p.lipschitz = 1.0;
  EXPECT_DOUBLE_EQ(cabs::target_batch_size(p, in),
                   (0.2 / 1.9) * 1000.0 / 2.0);

  p.kind = PolicyKind::geometric;
  p.m0 = 16;
  p.rho = 2.0;
  EXPECT_DOUBLE_EQ(cabs::target_batch_size(p, in), 128.0);
}

}  // namespace
