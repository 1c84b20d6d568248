#pragma once

#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "sbl/activity.hpp"
#include "sbl/dmap.hpp"
#include "sbl/errors.hpp"

namespace sbl {

// Forward model: predicts the effect schema's upcoming activity pattern from
// the effect's current pattern, the cause schema's current pattern, and an
// optional context pattern.  How far "upcoming" is depends on what the
// caller tunes it against — a relation with latency tau is learned by
// pairing inputs with the effect tau ticks later, making the output an
// anticipatory signal that leads the percept.  Keeps a sliding window of
// recent prediction errors so downstream users can ask whether predictions
// are currently trustworthy.
class PredictiveSchema {
 public:
  PredictiveSchema(std::string name, int effect_dim, int cause_dim,
                   int context_dim = 0, int window = 20,
                   double ready_threshold = 0.05, int hidden = 0)
      : name_(std::move(name)),
        context_dim_(context_dim),
        window_(window),
        ready_threshold_(ready_threshold),
        map_(context_dim > 0 ? std::vector<int>{effect_dim, cause_dim, context_dim}
                             : std::vector<int>{effect_dim, cause_dim},
             effect_dim, hidden) {}

  const std::string& name() const { return name_; }
  int effect_dim() const { return map_.out_dim(); }
  int cause_dim() const { return map_.in_dims()[1]; }
  int context_dim() const { return context_dim_; }

  ActivityPattern predict(const ActivityPattern& effect_now,
                          const ActivityPattern& cause_now,
                          const ActivityPattern& context = {}) const {
    return map_.evaluate(blocks(effect_now, cause_now, context));
  }

  // One learning step toward the observed next effect.  Returns the pre-step
  // mse and records it in the readiness window.
  double tune(const ActivityPattern& effect_now, const ActivityPattern& cause_now,
              const ActivityPattern& context, const ActivityPattern& observed_effect,
              double lr) {
    const double mse = map_.tune_mse(blocks(effect_now, cause_now, context),
                                     observed_effect, lr);
    push_error(mse);
    return mse;
  }

  double tune(const ActivityPattern& effect_now, const ActivityPattern& cause_now,
              const ActivityPattern& observed_effect, double lr) {
    return tune(effect_now, cause_now, {}, observed_effect, lr);
  }

  // Record a prediction error without changing weights (used when learning
  // is frozen but trust should still track reality).
  void observe_error(double mse) { push_error(mse); }

  double windowed_error() const {
    if (errors_.empty()) return 1e9;
    double s = 0.0;
    for (double e : errors_) s += e;
    return s / static_cast<double>(errors_.size());
  }

  // Trustworthy once the error window is full and its mean is small.
  bool ready() const {
    return static_cast<int>(errors_.size()) >= window_ &&
           windowed_error() < ready_threshold_;
  }

  void reset_trust() { errors_.clear(); }

  // Input-block layout of the underlying map; the cause block's index, which
  // distal learning differentiates through, is fixed at 1.
  static constexpr int kCauseBlock = 1;

  std::vector<const ActivityPattern*> blocks(const ActivityPattern& effect,
                                             const ActivityPattern& cause,
                                             const ActivityPattern& context) const {
    if (context_dim_ > 0) {
      if (static_cast<int>(context.size()) != context_dim_)
        fail(ErrorCode::DimensionMismatch,
             name_ + ": context dim " + std::to_string(context.size()) + " != " +
                 std::to_string(context_dim_));
      return {&effect, &cause, &context};
    }
    if (!context.empty())
      fail(ErrorCode::DimensionMismatch, name_ + ": unexpected context input");
    return {&effect, &cause};
  }

  DifferentiableMap& map() { return map_; }
  const DifferentiableMap& map() const { return map_; }

 private:
  void push_error(double mse) {
    errors_.push_back(mse);
    while (static_cast<int>(errors_.size()) > window_) errors_.pop_front();
  }

  std::string name_;
  int context_dim_;
  int window_;
  double ready_threshold_;
  DifferentiableMap map_;
  std::deque<double> errors_;
};

// Inverse model: given the effect schema's current pattern, a desired effect
// pattern, and optional context, emits the command pattern expected to drive
// the effect toward the goal.  It has no direct teacher; learning transports
// the effect-space error back into command space through the paired forward
// model's input gradient, builds a virtual command target one descent step
// away, and regresses toward that.
class DualSchema {
 public:
  DualSchema(std::string name, int effect_dim, int command_dim,
             int context_dim = 0, double theta_act = 0.05, int hidden = 0)
      : name_(std::move(name)),
        context_dim_(context_dim),
        theta_act_(theta_act),
        map_(context_dim > 0 ? std::vector<int>{effect_dim, effect_dim, context_dim}
                             : std::vector<int>{effect_dim, effect_dim},
             command_dim, hidden) {}

  const std::string& name() const { return name_; }
  int effect_dim() const { return map_.in_dims()[0]; }
  int command_dim() const { return map_.out_dim(); }
  int context_dim() const { return context_dim_; }
  double theta_act() const { return theta_act_; }

  // Command toward a desired effect; a quiet goal emits an exact zero
  // command (the dual stays silent when nothing is asked of it).
  ActivityPattern command(const ActivityPattern& effect_now,
                          const ActivityPattern& goal,
                          const ActivityPattern& context = {}) const {
    if (static_cast<int>(goal.size()) != effect_dim())
      fail(ErrorCode::DimensionMismatch,
           "dual " + name_ + ": goal dim " + std::to_string(goal.size()) +
               " != " + std::to_string(effect_dim()));
    if (mean_abs(goal) <= theta_act_) return zeros(command_dim());
    return map_.evaluate(blocks(effect_now, goal, context));
  }

  // Distal learning step.  `command_used` is the command actually issued,
  // `observed_effect` what the world then did, and `effect_at_cmd` the
  // effect pattern current when the command was issued.  The forward model
  // supplies the gradient pathway; the world supplies the error, so the
  // fixed point is the true inverse even if the forward model carries bias.
  // Returns the effect-space mse before the step.
  double distal_tune(const PredictiveSchema& forward,
                     const ActivityPattern& effect_at_cmd,
                     const ActivityPattern& goal, const ActivityPattern& context,
                     const ActivityPattern& command_used,
                     const ActivityPattern& observed_effect, double lr,
                     double virtual_step) {
    if (observed_effect.size() != goal.size())
      fail(ErrorCode::DimensionMismatch,
           "dual " + name_ + ": effect dim " + std::to_string(observed_effect.size()) +
               " != goal dim " + std::to_string(goal.size()));
    ActivityPattern err(goal.size());
    double mse = 0.0;
    for (std::size_t i = 0; i < goal.size(); ++i) {
      err[i] = observed_effect[i] - goal[i];
      mse += err[i] * err[i];
    }
    mse /= static_cast<double>(goal.size());

    ActivityPattern down = forward.map().jacobian_transpose_vec(
        forward.blocks(effect_at_cmd, command_used, context), err,
        PredictiveSchema::kCauseBlock);
    ActivityPattern target = command_used;
    for (std::size_t i = 0; i < target.size(); ++i)
      target[i] -= virtual_step * down[i];
    map_.tune_mse(blocks(effect_at_cmd, goal, context), target, lr);
    return mse;
  }

  std::vector<const ActivityPattern*> blocks(const ActivityPattern& effect,
                                             const ActivityPattern& goal,
                                             const ActivityPattern& context) const {
    if (context_dim_ > 0) {
      if (static_cast<int>(context.size()) != context_dim_)
        fail(ErrorCode::DimensionMismatch,
             name_ + ": context dim " + std::to_string(context.size()) + " != " +
                 std::to_string(context_dim_));
      return {&effect, &goal, &context};
    }
    if (!context.empty())
      fail(ErrorCode::DimensionMismatch, name_ + ": unexpected context input");
    return {&effect, &goal};
  }

  DifferentiableMap& map() { return map_; }
  const DifferentiableMap& map() const { return map_; }

 private:
  std::string name_;
  int context_dim_;
  double theta_act_;
  DifferentiableMap map_;
};

}  // namespace sbl
