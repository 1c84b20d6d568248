#pragma once

#include <string>
#include <utility>

#include "sbl/activity.hpp"
#include "sbl/dmap.hpp"
#include "sbl/errors.hpp"

namespace sbl {

// Goal schema: translates a motivationally relevant source pattern into a
// desired activity pattern for some effect schema.  The source input is
// peak-normalized before the map so the emitted goal encodes *which* state
// is desired, not how intense the triggering stimulus happened to be.
//
// Emission is gated: an inactive source (mean-abs at or below theta_act)
// emits an exact zero pattern and the map is not consulted.
//
// Tuning is regression toward effect patterns observed on successful
// outcomes; the caller decides eligibility (when a success happened) and
// hands in the source pattern that was present when the goal was posted.
class GoalSchema {
 public:
  GoalSchema(std::string name, int source_dim, int effect_dim,
             double theta_act = 0.05)
      : name_(std::move(name)),
        theta_act_(theta_act),
        map_({source_dim}, effect_dim) {}

  const std::string& name() const { return name_; }
  int source_dim() const { return map_.in_dims()[0]; }
  int effect_dim() const { return map_.out_dim(); }
  double theta_act() const { return theta_act_; }

  bool source_active(const ActivityPattern& source) const {
    return mean_abs(source) > theta_act_;
  }

  // Desired effect pattern for the current source input; zeros when the
  // source is quiet.
  ActivityPattern emit(const ActivityPattern& source) const {
    check_dim(source);
    if (!source_active(source)) return zeros(effect_dim());
    ActivityPattern z = normalized(source);
    return map_.evaluate({&z});
  }

  // One regression step pulling emit(source) toward an effect pattern that
  // was actually observed on a successful outcome.  Returns pre-step mse.
  double tune(const ActivityPattern& source, const ActivityPattern& observed_effect,
              double lr) {
    check_dim(source);
    ActivityPattern z = normalized(source);
    return map_.tune_mse({&z}, observed_effect, lr);
  }

  ActivityPattern normalized(const ActivityPattern& source) const {
    ActivityPattern z = source;
    const double peak = max_abs(z);
    if (peak > 0.0)
      for (double& v : z) v /= peak;
    return z;
  }

 private:
  void check_dim(const ActivityPattern& source) const {
    if (static_cast<int>(source.size()) != source_dim())
      fail(ErrorCode::DimensionMismatch,
           "goal " + name_ + ": source dim " + std::to_string(source.size()) +
               " != " + std::to_string(source_dim()));
  }

  std::string name_;
  double theta_act_;
  DifferentiableMap map_;
};

}  // namespace sbl
