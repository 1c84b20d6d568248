#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sbl/activity.hpp"

namespace sbl {

struct PortSpec {
  std::string name;
  int dim = 1;
};

// Everything a behavior may look at while the tick is being evaluated.
// Inputs are the frozen snapshot the network assembled for this schema;
// behaviors must not reach into live network state.
struct BehaviorContext {
  long tick = 0;
  const std::vector<ActivityPattern>* inputs = nullptr;  // one per input port
  std::mt19937_64* rng = nullptr;                        // this schema's own stream

  const ActivityPattern& in(std::size_t i) const { return (*inputs)[i]; }
};

// What a behavior hands back: one pattern per output port, a scalar activity
// level in [0,1], and an optional commit action. Commit actions run in the
// commit phase (in schema registration order) and are the only sanctioned way
// for a behavior to mutate its own internal state.
struct BehaviorResult {
  std::vector<ActivityPattern> outputs;
  double activity = -1.0;  // < 0 -> derive from outputs (clamped max |value|)
  std::function<void()> commit;
};

using Behavior = std::function<BehaviorResult(const BehaviorContext&)>;

struct SchemaNode {
  std::string name;
  std::string kind;  // "perceptual", "motor", "predictive", ... free-form tag
  std::vector<PortSpec> inputs;
  std::vector<PortSpec> outputs;
  Behavior behavior;
  double activity = 0.0;  // last committed activity level
};

}  // namespace sbl
