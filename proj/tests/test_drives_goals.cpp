#include <gtest/gtest.h>

#include <random>

#include "sbl/activity.hpp"
#include "sbl/drives.hpp"
#include "sbl/goals.hpp"

namespace {

using sbl::ActivityPattern;
using sbl::DriveState;
using sbl::GoalSchema;
using sbl::update_drive;

TEST(Drive, AutonomousGrowthExactSequence) {
  DriveState d{0.2, 1.0, 0.01};
  // d <- d + 0.01*(1 - d), no reduction, no incentive.
  const double expect[] = {0.208, 0.21592, 0.2237608, 0.231523192, 0.23920796008};
  for (double e : expect) {
    update_drive(d, 0.0, 0.0);
    EXPECT_NEAR(d.level, e, 1e-12);
  }
}

TEST(Drive, ConsummatoryTickExactValue) {
  // All terms read the same pre-step level: growth and incentive are not
  // applied to an already-reduced value.
  DriveState d{0.7, 1.0, 0.01};
  update_drive(d, 1.0, 0.3);
  // 0.7 + 0.01*0.3 - 1.0*0.7 + 0.3*0.3
  EXPECT_NEAR(d.level, 0.093, 1e-12);
}

TEST(Drive, FullReductionLeavesOnlyGrowthTerms) {
  DriveState d{0.5, 1.0, 0.01};
  update_drive(d, 1.0, 0.0);
  EXPECT_NEAR(d.level, 0.005, 1e-12);
}

TEST(Drive, MonotoneApproachNeverOvershoots) {
  DriveState d{0.0, 1.0, 0.05};
  double prev = d.level;
  for (int t = 0; t < 400; ++t) {
    update_drive(d, 0.0, 0.0);
    EXPECT_GT(d.level, prev);
    EXPECT_LE(d.level, d.d_max);
    prev = d.level;
  }
  EXPECT_NEAR(d.level, d.d_max, 1e-6);
}

TEST(Drive, LevelStaysInRangeUnderArbitraryInputs) {
  std::mt19937_64 gen(71);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    DriveState d{unit(gen), trial % 2 ? 1.0 : 0.7, unit(gen)};
    d.level *= d.d_max;
    for (int t = 0; t < 2000; ++t) {
      update_drive(d, unit(gen), unit(gen));
      ASSERT_GE(d.level, 0.0);
      ASSERT_LE(d.level, d.d_max);
    }
  }
}

TEST(Drive, ExtremeInputsAreClampedNotExploded) {
  DriveState hi{0.0, 1.0, 1.0};
  update_drive(hi, 0.0, 1.0);  // raw value would be 2.0
  EXPECT_DOUBLE_EQ(hi.level, 1.0);

  DriveState lo{0.9, 1.0, 0.0};
  update_drive(lo, 5.0, 0.0);  // raw value would be -3.6
  EXPECT_DOUBLE_EQ(lo.level, 0.0);
}

ActivityPattern bump16() {
  ActivityPattern s(16, 0.0);
  s[6] = 0.4;
  s[7] = 0.9;
  s[8] = 1.3;
  s[9] = 0.7;
  return s;
}

TEST(Goal, InactiveSourceEmitsExactZeros) {
  GoalSchema g("snap-goal", 16, 8, 0.05);
  ActivityPattern quiet(16, 0.03);  // mean-abs 0.03 <= theta
  ActivityPattern out = g.emit(quiet);
  ASSERT_EQ(out.size(), 8u);
  for (double v : out) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Goal, EmissionIgnoresStimulusIntensity) {
  GoalSchema g("snap-goal", 16, 8);
  ActivityPattern s = bump16();
  // Train a bit so the map is nonzero.
  ActivityPattern target(8, 0.0);
  target[2] = 0.5;
  target[5] = -0.3;
  for (int i = 0; i < 200; ++i) g.tune(s, target, 0.05);

  ActivityPattern strong = s;
  for (double& v : strong) v *= 2.0;  // power of two: same normalized bits
  ActivityPattern a = g.emit(s);
  ActivityPattern b = g.emit(strong);
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(a[i], b[i]);
}

TEST(Goal, ConvergesToObservedSuccessPattern) {
  GoalSchema g("capture-goal", 16, 8);
  ActivityPattern s = bump16();
  ActivityPattern observed(8);
  for (int i = 0; i < 8; ++i) observed[i] = 0.6 - 0.12 * i;  // in [-0.24, 0.6]

  double mse = 1.0;
  for (int i = 0; i < 500; ++i) mse = g.tune(s, observed, 0.05);
  EXPECT_LT(mse, 1e-6);

  ActivityPattern out = g.emit(s);
  double worst = 0.0;
  for (int i = 0; i < 8; ++i) worst = std::max(worst, std::fabs(out[i] - observed[i]));
  EXPECT_LT(worst, 1e-3);
}

TEST(Goal, FreshMapEmitsZeroGoal) {
  GoalSchema g("g", 16, 4);
  ActivityPattern s = bump16();
  for (double v : g.emit(s)) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Goal, SourceDimensionIsChecked) {
  GoalSchema g("g", 16, 4);
  ActivityPattern wrong(9, 1.0);
  try {
    g.emit(wrong);
    FAIL() << "expected dimension error";
  } catch (const sbl::SblError& e) {
    EXPECT_EQ(e.code(), sbl::ErrorCode::DimensionMismatch);
  }
}

}  // namespace
