#pragma once

#include <algorithm>
#include <cmath>

namespace sbl {

// Internal drive with autonomous growth toward d_max, reduction on
// consummatory events, and stimulus-bound incentive growth:
//
//   d(t+1) = d(t) + alpha*|d_max - d(t)| - a(t)*|d(t)| + I(t)*|d_max - d(t)|
//
// then clamped into [0, d_max] so no input sequence can push the level out
// of range.
struct DriveState {
  double level = 0.0;
  double d_max = 1.0;
  double alpha = 0.01;  // autonomous growth rate per tick
};

inline double update_drive(DriveState& d, double reduction_a, double incentive_I) {
  const double gap = std::fabs(d.d_max - d.level);
  const double next =
      d.level + d.alpha * gap - reduction_a * std::fabs(d.level) + incentive_I * gap;
  d.level = std::clamp(next, 0.0, d.d_max);
  return d.level;
}

}  // namespace sbl
