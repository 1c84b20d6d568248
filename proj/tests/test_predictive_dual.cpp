#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sbl/activity.hpp"
#include "sbl/predictive.hpp"

namespace {

using sbl::ActivityPattern;
using sbl::DualSchema;
using sbl::PredictiveSchema;

// Known linear plant: next effect = A * cause, independent of current state.
ActivityPattern plant3to2(const ActivityPattern& c) {
  return {0.3 * c[0] - 0.2 * c[1] + 0.1 * c[2],
          -0.1 * c[0] + 0.4 * c[1] + 0.2 * c[2]};
}

TEST(Predictive, LearnsLinearPlantBelowTightError) {
  PredictiveSchema p("fwd", 2, 3);
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-0.6, 0.6);

  ActivityPattern effect(2, 0.0);
  double mse = 1.0;
  for (int step = 0; step < 6000; ++step) {
    ActivityPattern c{u(gen), u(gen), u(gen)};
    ActivityPattern next = plant3to2(c);
    mse = p.tune(effect, c, next, 0.05);
    effect = next;
  }
  EXPECT_LT(p.windowed_error(), 1e-3);
  EXPECT_TRUE(p.ready());

  // Held-out probes: prediction tracks the cause regardless of current state.
  for (int i = 0; i < 10; ++i) {
    ActivityPattern c{u(gen), u(gen), u(gen)};
    ActivityPattern want = plant3to2(c);
    ActivityPattern got = p.predict(ActivityPattern(2, 0.0), c);
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(got[k], want[k], 5e-2);
  }
}

TEST(Predictive, FreshModelIsNotReady) {
  PredictiveSchema p("fwd", 2, 3);
  EXPECT_FALSE(p.ready());
  EXPECT_GT(p.windowed_error(), 1.0);
}

TEST(Predictive, ReadinessDropsWhenPlantChanges) {
  PredictiveSchema p("fwd", 2, 3);
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  ActivityPattern effect(2, 0.0);
  for (int step = 0; step < 6000; ++step) {
    ActivityPattern c{u(gen), u(gen), u(gen)};
    ActivityPattern next = plant3to2(c);
    p.tune(effect, c, next, 0.05);
    effect = next;
  }
  ASSERT_TRUE(p.ready());

  // The world changes sign; trust must collapse even with learning frozen.
  for (int step = 0; step < 20; ++step) {
    ActivityPattern c{u(gen), u(gen), u(gen)};
    ActivityPattern flipped = plant3to2(c);
    for (double& v : flipped) v = -v;
    p.observe_error(sbl::mean_sq_diff(p.predict(effect, c), flipped));
    effect = flipped;
  }
  EXPECT_FALSE(p.ready());

  p.reset_trust();
  EXPECT_FALSE(p.ready());
  EXPECT_GT(p.windowed_error(), 1.0);
}

TEST(Predictive, ContextBlockIsPartOfTheMap) {
  // With a context input the same cause must yield different predictions;
  // the map has to route the context block into the output.
  PredictiveSchema p("fwd", 1, 1, 1);
  for (int step = 0; step < 6000; ++step) {
    const double ctx = step % 2 ? 1.0 : -1.0;
    const double cause = 0.1 * ((step * 7) % 11) / 11.0 + 0.2;
    p.tune({0.0}, {cause}, {ctx}, {cause + 0.5 * ctx}, 0.05);
  }
  EXPECT_NEAR(p.predict({0.0}, {0.3}, {1.0})[0], 0.8, 5e-2);
  EXPECT_NEAR(p.predict({0.0}, {0.3}, {-1.0})[0], -0.2, 5e-2);

  // Wrong context dimension is rejected.
  try {
    p.predict({0.0}, {0.3}, {1.0, 2.0});
    FAIL();
  } catch (const sbl::SblError& e) {
    EXPECT_EQ(e.code(), sbl::ErrorCode::DimensionMismatch);
  }
}

TEST(Dual, QuietGoalEmitsExactZeroCommand) {
  DualSchema d("inv", 4, 3, 0, 0.05);
  ActivityPattern quiet(4, 0.04);
  for (double v : d.command(ActivityPattern(4, 0.2), quiet))
    EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Dual, GradientTransportMatchesMseConvention) {
  // jacobian_transpose_vec(v = pred - target) must equal the analytic mse
  // input gradient up to the 2/n factor that distal_tune folds into its
  // virtual step size.
  PredictiveSchema p("fwd", 2, 3);
  std::mt19937_64 gen(13);
  p.map().init(gen, 0.3);

  ActivityPattern e{0.1, -0.2}, c{0.2, -0.4, 0.5}, goal{0.3, -0.1};
  ActivityPattern pred = p.predict(e, c);
  ActivityPattern v(2);
  for (int k = 0; k < 2; ++k) v[k] = pred[k] - goal[k];

  ActivityPattern jtv =
      p.map().jacobian_transpose_vec({&e, &c}, v, PredictiveSchema::kCauseBlock);
  ActivityPattern gmse =
      p.map().input_gradient_mse({&e, &c}, goal, PredictiveSchema::kCauseBlock);
  ASSERT_EQ(jtv.size(), gmse.size());
  for (std::size_t i = 0; i < jtv.size(); ++i)
    EXPECT_NEAR(gmse[i], jtv[i] * 2.0 / 2.0, 1e-12);
}

TEST(Dual, DistalLearningConvergesToAnalyticInverse) {
  // Scalar plant effect = 2 * command, so the true inverse is goal / 2.
  auto plant = [](double cmd) { return 2.0 * cmd; };

  PredictiveSchema fwd("fwd", 1, 1);
  std::mt19937_64 gen(14);
  std::uniform_real_distribution<double> cu(-0.8, 0.8);
  for (int step = 0; step < 4000; ++step) {
    ActivityPattern c{cu(gen)};
    fwd.tune({0.0}, c, {plant(c[0])}, 0.05);
  }
  ASSERT_TRUE(fwd.ready());

  DualSchema inv("inv", 1, 1, 0, 0.05);
  std::uniform_real_distribution<double> gu(0.1, 0.7);
  std::bernoulli_distribution flip(0.5);
  for (int step = 0; step < 2000; ++step) {
    ActivityPattern goal{flip(gen) ? gu(gen) : -gu(gen)};
    ActivityPattern cmd = inv.command({0.0}, goal);
    ActivityPattern effect{plant(cmd[0])};
    inv.distal_tune(fwd, {0.0}, goal, {}, cmd, effect, 0.3, 0.2);
  }

  for (double g : {-0.6, -0.45, -0.3, -0.12, 0.12, 0.3, 0.45, 0.6}) {
    ActivityPattern cmd = inv.command({0.0}, {g});
    EXPECT_NEAR(cmd[0], g / 2.0, 1e-3) << "goal " << g;
  }
}

TEST(Dual, FixedPointIsStableUnderContinuedTuning) {
  // Once commands reach the true inverse, further distal steps must not
  // drift away (the world error, not the forward model, defines the target).
  auto plant = [](double cmd) { return 2.0 * cmd; };
  PredictiveSchema fwd("fwd", 1, 1);
  std::mt19937_64 gen(15);
  std::uniform_real_distribution<double> cu(-0.8, 0.8);
  for (int step = 0; step < 4000; ++step) {
    ActivityPattern c{cu(gen)};
    fwd.tune({0.0}, c, {plant(c[0])}, 0.05);
  }

  DualSchema inv("inv", 1, 1, 0, 0.05);
  std::uniform_real_distribution<double> gu(0.1, 0.7);
  std::bernoulli_distribution flip(0.5);
  auto train = [&](int steps) {
    for (int step = 0; step < steps; ++step) {
      ActivityPattern goal{flip(gen) ? gu(gen) : -gu(gen)};
      ActivityPattern cmd = inv.command({0.0}, goal);
      inv.distal_tune(fwd, {0.0}, goal, {}, cmd, {plant(cmd[0])}, 0.3, 0.2);
    }
  };
  train(2000);
  ActivityPattern before = inv.command({0.0}, {0.4});
  train(2000);
  ActivityPattern after = inv.command({0.0}, {0.4});
  EXPECT_NEAR(before[0], 0.2, 1e-3);
  EXPECT_NEAR(after[0], 0.2, 1e-3);
}

}  // namespace
