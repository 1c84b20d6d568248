#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sbl/activity.hpp"
#include "sbl/cause_effect.hpp"
#include "sbl/errors.hpp"
#include "sbl/goals.hpp"
#include "sbl/network.hpp"
#include "sbl/predictive.hpp"

namespace sbl {

// Incoherence taxonomy.  An incorrect expectation means the forward model
// was wrong while both endpoints were active (a parameter problem, handled
// by ordinary tuning).  Unexpected events are structural: either a brand-new
// cause-effect relation surfaced, or a prediction failed because one of the
// endpoints never activated at all.
enum class IncoherenceKind {
  IncorrectExpectation,       // error with both endpoints active
  UnexpectedNewRelation,      // fresh extraction from the reliability matrix
  UnexpectedInactiveEndpoint  // error while cause or effect stayed quiet
};

// Whether the surprise came while closing in on a goal or drifting away.
enum class GoalTrend { Closer, Farther };

struct IncoherenceEvent {
  IncoherenceKind kind = IncoherenceKind::IncorrectExpectation;
  std::string effect;
  std::string cause;
  int tau = 0;
  GoalTrend goal_trend = GoalTrend::Farther;
  long long tick = 0;
  double magnitude = 0.0;
};

inline const char* kind_name(IncoherenceKind k) {
  switch (k) {
    case IncoherenceKind::IncorrectExpectation: return "incorrect-expectation";
    case IncoherenceKind::UnexpectedNewRelation: return "new-relation";
    case IncoherenceKind::UnexpectedInactiveEndpoint: return "inactive-endpoint";
  }
  return "?";
}

// Per-tick classification inputs, assembled by the scenario harness.
struct PredictionReport {
  std::string effect;
  std::string cause;
  int tau = 0;
  double error_norm = 0.0;
  bool cause_active = false;
  bool effect_active = false;
};

struct GoalReport {
  std::string effect;
  double dist_trial_start = 0.0;
  double dist_now = 0.0;
};

struct ClassifyInputs {
  long long tick = 0;
  std::vector<ExtractedRelation> new_relations;
  std::vector<PredictionReport> predictions;
  std::vector<GoalReport> goals;
};

// Audit-trail entry: everything needed to rebuild one construction.
struct ConstructionRecord {
  IncoherenceEvent trigger;
  std::string predictive_node;
  std::string dual_node;
  std::string adapted_cause;
  std::string goal_node;
  long long tick = 0;
};

// Live handle for a constructed forward/inverse pair.
struct SchemaPair {
  std::shared_ptr<PredictiveSchema> predictive;
  std::shared_ptr<DualSchema> dual;
  std::string effect, cause;
  std::string predictive_node, dual_node, goal_node;
  int tau = 0;
  std::shared_ptr<bool> engaged;       // dual may emit commands
  std::shared_ptr<double> gate;        // activity-shortfall threshold
  // Once the effect has come this close to the goal, the direct path owns
  // the behavior until the effect is lost outright; without this latch the
  // dual chatters in and out around the shortfall boundary.
  std::shared_ptr<bool> satisfied;
  // A workaround that keeps acting while the effect stands still is not
  // working.  `futile` counts emitting ticks since the effect last improved;
  // past the window the pair stands down for a cooldown and the direct path
  // gets its turn.
  std::shared_ptr<int> futile;
  std::shared_ptr<int> cooldown;
  std::shared_ptr<double> best_effect;
  int tune_boost = 1;                  // extra tuning passes while recovering
};

struct ConstructorConfig {
  double theta_act = 0.05;
  double error_eps = 1e-6;      // prediction error below this is coherence
  double shortfall_gate = 0.45; // dual emits when effect falls this far short
  // When the context field shares the goal's format, the dual only emits
  // while the context stands across the goal direction (mean elementwise
  // overlap above this).  A workaround schema is for goals that are being
  // obstructed; with the obstruction elsewhere, the direct path owns the
  // behavior.
  double context_overlap = 0.01;
  // Bounded futility: after this many emitting ticks with no improvement in
  // the effect, the dual stands down for `futility_cooldown` ticks so the
  // direct path can try, then re-arms fresh.  Zero disables the bound.
  int futility_window = 20;
  int futility_cooldown = 20;
  bool engage_on_construct = true;
  int mod_channels_per_schema = 1;
  int intensified_boost = 5;    // tuning multiplier for recovery activation
  std::string context_schema;   // empty: pairs are built without context
  int predictive_window = 20;
  double ready_threshold = 0.05;
};

// Structural-learning state machine: classifies incoherence events, builds
// predictive+dual pairs for unexpected successes, re-activates existing
// duals for unexpected losses, and adapts cause schemas with a modulatory
// override input.
class SchemaConstructor {
 public:
  explicit SchemaConstructor(Network* net, ConstructorConfig cfg = {})
      : net_(net), cfg_(std::move(cfg)),
        duals_enabled_(std::make_shared<bool>(true)) {}

  const ConstructorConfig& config() const { return cfg_; }

  // A dual needs a goal pattern for its effect schema; scenarios register
  // which network node (wrapping which goal schema) provides it.
  void register_goal(const std::string& effect_schema, const std::string& goal_node,
                     std::shared_ptr<GoalSchema> goal) {
    net_->schema_id(goal_node);  // must exist
    goals_[effect_schema] = {goal_node, std::move(goal)};
  }

  bool has_goal_for(const std::string& effect_schema) const {
    return goals_.count(effect_schema) > 0;
  }

  // Label this tick's surprises.  Largest magnitude first; ties break on
  // names so the ordering is reproducible.
  std::vector<IncoherenceEvent> classify(const ClassifyInputs& in) const {
    std::vector<IncoherenceEvent> out;
    for (const auto& rel : in.new_relations) {
      IncoherenceEvent ev;
      ev.kind = IncoherenceKind::UnexpectedNewRelation;
      ev.effect = rel.effect;
      ev.cause = rel.cause;
      ev.tau = rel.lag;
      ev.goal_trend = trend_for(rel.effect, in.goals);
      ev.tick = in.tick;
      ev.magnitude = rel.reliability;
      out.push_back(std::move(ev));
    }
    for (const auto& pr : in.predictions) {
      if (pr.error_norm <= cfg_.error_eps) continue;
      IncoherenceEvent ev;
      ev.kind = pr.cause_active && pr.effect_active
                    ? IncoherenceKind::IncorrectExpectation
                    : IncoherenceKind::UnexpectedInactiveEndpoint;
      ev.effect = pr.effect;
      ev.cause = pr.cause;
      ev.tau = pr.tau;
      ev.goal_trend = trend_for(pr.effect, in.goals);
      ev.tick = in.tick;
      ev.magnitude = pr.error_norm;
      out.push_back(std::move(ev));
    }
    std::sort(out.begin(), out.end(),
              [](const IncoherenceEvent& a, const IncoherenceEvent& b) {
                if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
                if (a.tick != b.tick) return a.tick < b.tick;
                if (a.effect != b.effect) return a.effect < b.effect;
                return a.cause < b.cause;
              });
    return out;
  }

  // Route an event to its structural consequence.  Only an unexpected new
  // relation on a goal-approaching trajectory builds schemas; an unexpected
  // silent endpoint on a goal-retreating trajectory re-activates the pair
  // built in better days.  Everything else is parameter learning or gets
  // logged for the trace.
  std::optional<ConstructionRecord> handle(const IncoherenceEvent& ev) {
    if (ev.kind == IncoherenceKind::UnexpectedNewRelation &&
        ev.goal_trend == GoalTrend::Closer) {
      if (has_pair(ev.effect, ev.cause)) return std::nullopt;  // debounced
      return construct_pair(ev);
    }
    if (ev.kind == IncoherenceKind::UnexpectedInactiveEndpoint &&
        ev.goal_trend == GoalTrend::Farther) {
      if (has_pair(ev.effect, ev.cause)) {
        activate_dual(ev.effect, ev.cause, cfg_.intensified_boost);
        return std::nullopt;
      }
      unhandled_.push_back(ev);  // nothing to re-construct from
      return std::nullopt;
    }
    unhandled_.push_back(ev);
    return std::nullopt;
  }

  // Build P^{effect,cause} and its dual, wire them into the network, and
  // adapt the cause schema with a modulatory override.  All validation runs
  // before the first mutation, so a throw leaves the network untouched.
  ConstructionRecord construct_pair(const IncoherenceEvent& ev) {
    if (ev.kind != IncoherenceKind::UnexpectedNewRelation ||
        ev.goal_trend != GoalTrend::Closer)
      fail(ErrorCode::ConfigError,
           std::string("construct_pair needs a new-relation/goal-approach event, got ") +
               kind_name(ev.kind));
    const std::string key = pair_key(ev.effect, ev.cause);
    if (pairs_.count(key))
      fail(ErrorCode::DuplicatePair, ev.effect + " <- " + ev.cause);
    auto git = goals_.find(ev.effect);
    if (git == goals_.end())
      fail(ErrorCode::NoGoalSchemaForEffect, "no goal schema feeds effect " + ev.effect);
    if (free_mod_channels(ev.cause) <= 0)
      fail(ErrorCode::NoFreeModulatoryChannel, ev.cause);

    // Snapshot names and dims up front: adding schemas below may reallocate
    // the network's node storage.
    const int effect_dim = net_->schema(ev.effect).outputs.at(0).dim;
    const int command_dim = net_->schema(ev.cause).outputs.at(0).dim;
    const std::string eff_out = ev.effect + "." + net_->schema(ev.effect).outputs.at(0).name;
    const std::string cau_out = ev.cause + "." + net_->schema(ev.cause).outputs.at(0).name;
    const std::string goal_out =
        git->second.node + "." + net_->schema(git->second.node).outputs.at(0).name;
    const bool with_ctx = !cfg_.context_schema.empty();
    const int ctx_dim =
        with_ctx ? net_->schema(cfg_.context_schema).outputs.at(0).dim : 0;

    const std::string pname = "P_" + ev.effect + "_" + ev.cause;
    const std::string dname = "D_" + ev.cause + "_" + ev.effect;
    if (net_->has_schema(pname) || net_->has_schema(dname))
      fail(ErrorCode::DuplicateName, pname + " / " + dname);

    SchemaPair pair;
    pair.effect = ev.effect;
    pair.cause = ev.cause;
    pair.tau = ev.tau;
    pair.predictive_node = pname;
    pair.dual_node = dname;
    pair.goal_node = git->second.node;
    pair.predictive = std::make_shared<PredictiveSchema>(
        pname, effect_dim, command_dim, ctx_dim, cfg_.predictive_window,
        cfg_.ready_threshold);
    pair.dual = std::make_shared<DualSchema>(dname, effect_dim, command_dim,
                                             ctx_dim, cfg_.theta_act);
    pair.engaged = std::make_shared<bool>(cfg_.engage_on_construct);
    pair.gate = std::make_shared<double>(cfg_.shortfall_gate);
    pair.satisfied = std::make_shared<bool>(false);
    pair.futile = std::make_shared<int>(0);
    pair.cooldown = std::make_shared<int>(0);
    pair.best_effect = std::make_shared<double>(-1.0);

    // Forward-model node: emits the prediction of the effect's next pattern.
    {
      SchemaNode node;
      node.name = pname;
      node.kind = "predictive";
      node.inputs = {{"x", effect_dim}, {"y", command_dim}};
      if (with_ctx) node.inputs.push_back({"v", ctx_dim});
      node.outputs = {{"out", effect_dim}};
      std::shared_ptr<PredictiveSchema> P = pair.predictive;
      node.behavior = [P, with_ctx](const BehaviorContext& ctx) {
        BehaviorResult r;
        r.outputs.push_back(with_ctx ? P->predict(ctx.in(0), ctx.in(1), ctx.in(2))
                                     : P->predict(ctx.in(0), ctx.in(1)));
        return r;
      };
      net_->add_schema(std::move(node));
    }
    // The relation says the cause leads the effect by tau ticks, so the
    // forward model reads the cause as it acts and emits the effect pattern
    // that will follow: its output runs tau ticks ahead of the percept.
    // That lead is the anticipatory signal this construction exists for.
    net_->connect(eff_out, pname + ".x", 0);
    net_->connect(cau_out, pname + ".y", 0);
    if (with_ctx)
      net_->connect(context_out_(), pname + ".v", 0);

    // Inverse-model node: emits a command whenever a goal is posted, the
    // dual is engaged, and the effect is falling short of the goal.
    {
      SchemaNode node;
      node.name = dname;
      node.kind = "dual";
      node.inputs = {{"x", effect_dim}, {"g", effect_dim}};
      if (with_ctx) node.inputs.push_back({"v", ctx_dim});
      node.outputs = {{"out", command_dim}};
      std::shared_ptr<DualSchema> D = pair.dual;
      std::shared_ptr<bool> engaged = pair.engaged;
      std::shared_ptr<bool> enabled = duals_enabled_;
      std::shared_ptr<double> gate = pair.gate;
      std::shared_ptr<bool> satisfied = pair.satisfied;
      const double theta = cfg_.theta_act;
      const double overlap_min = cfg_.context_overlap;
      const int cdim = command_dim;
      node.behavior = [D, engaged, enabled, gate, satisfied, theta,
                       overlap_min, cdim, with_ctx](const BehaviorContext& ctx) {
        BehaviorResult r;
        const ActivityPattern& effect_now = ctx.in(0);
        const ActivityPattern& goal = ctx.in(1);
        const double ag = mean_abs(goal);
        if (!*engaged || !*enabled || ag <= theta) {
          r.outputs.push_back(zeros(cdim));
          return r;
        }
        const double shortfall = clamp01((ag - mean_abs(effect_now)) / ag);
        if (shortfall <= *gate) {
          *satisfied = true;
          r.outputs.push_back(zeros(cdim));
          return r;
        }
        if (*satisfied) {
          // goal persistence: a dimmed effect is still acquired; only a
          // lost one re-opens the workaround
          if (max_abs(effect_now) >= theta) {
            r.outputs.push_back(zeros(cdim));
            return r;
          }
          *satisfied = false;
        }
        // A workaround exists for goals that are being obstructed: when the
        // context field shares the goal's format, require it to stand
        // across the goal direction, or stay silent and let the direct
        // path act.
        if (with_ctx && ctx.in(2).size() == goal.size()) {
          double ov = 0.0;
          for (std::size_t i = 0; i < goal.size(); ++i)
            ov += ctx.in(2)[i] * goal[i];
          if (ov / static_cast<double>(goal.size()) < overlap_min) {
            r.outputs.push_back(zeros(cdim));
            return r;
          }
        }
        r.outputs.push_back(with_ctx ? D->command(effect_now, goal, ctx.in(2))
                                     : D->command(effect_now, goal));
        return r;
      };
      net_->add_schema(std::move(node));
    }
    net_->connect(eff_out, dname + ".x", 0);
    net_->connect(goal_out, dname + ".g", 0);
    if (with_ctx)
      net_->connect(context_out_(), dname + ".v", 0);

    adapt_cause_schema(ev.cause, dname);

    pairs_.emplace(key, std::move(pair));
    ConstructionRecord rec{ev, pname, dname, ev.cause, git->second.node,
                           ev.tick};
    records_.push_back(rec);
    return rec;
  }

  // Grow a modulatory input on the cause schema, feed it from the dual, and
  // wrap the behavior so a non-quiet modulatory pattern overrides the
  // schema's own output while a quiet one leaves it untouched.  With more
  // than one channel the wraps nest; the most recent adaptation has the
  // final say when several modulators are active at once.
  void adapt_cause_schema(const std::string& cause, const std::string& dual_node) {
    int& free_ch = free_mod_channels(cause);
    if (free_ch <= 0) fail(ErrorCode::NoFreeModulatoryChannel, cause);

    const int mod_dim = net_->schema(dual_node).outputs.at(0).dim;
    const std::string dual_out =
        dual_node + "." + net_->schema(dual_node).outputs.at(0).name;
    const int used = cfg_.mod_channels_per_schema - free_ch;
    const std::string port = used == 0 ? "mod" : "mod" + std::to_string(used + 1);
    const int mod_idx = net_->add_input_port(cause, {port, mod_dim});
    net_->connect(dual_out, cause + "." + port, 0);

    Behavior original = net_->schema(cause).behavior;
    const double theta = cfg_.theta_act;
    net_->set_behavior(cause, [original, mod_idx, theta](const BehaviorContext& ctx) {
      BehaviorResult r = original ? original(ctx) : BehaviorResult{};
      const ActivityPattern& mod = ctx.in(mod_idx);
      if (mean_abs(mod) > theta) {
        r.outputs.at(0) = mod;
        r.activity = -1.0;  // re-derive from the overriding pattern
      }
      return r;
    });
    --free_ch;
  }

  // Re-arm an existing dual (the lesion-recovery path) with boosted tuning.
  void activate_dual(const std::string& effect, const std::string& cause, int boost) {
    auto it = pairs_.find(pair_key(effect, cause));
    if (it == pairs_.end())
      fail(ErrorCode::NoPairedPredictive, effect + " <- " + cause);
    *it->second.engaged = true;
    it->second.tune_boost = std::max(1, boost);
  }

  bool has_pair(const std::string& effect, const std::string& cause) const {
    return pairs_.count(pair_key(effect, cause)) > 0;
  }

  SchemaPair& pair(const std::string& effect, const std::string& cause) {
    auto it = pairs_.find(pair_key(effect, cause));
    if (it == pairs_.end())
      fail(ErrorCode::NoPairedPredictive, effect + " <- " + cause);
    return it->second;
  }

  std::vector<SchemaPair*> pairs() {
    std::vector<SchemaPair*> out;
    for (auto& [k, v] : pairs_) out.push_back(&v);
    return out;
  }

  const std::vector<ConstructionRecord>& records() const { return records_; }
  const std::vector<IncoherenceEvent>& unhandled() const { return unhandled_; }

  // Global switch over every dual's emission (lesion-protocol phases flip it).
  void set_duals_enabled(bool on) { *duals_enabled_ = on; }
  bool duals_enabled() const { return *duals_enabled_; }

 private:
  static std::string pair_key(const std::string& effect, const std::string& cause) {
    return effect + "\x1f" + cause;
  }

  static GoalTrend trend_for(const std::string& effect,
                             const std::vector<GoalReport>& goals) {
    for (const auto& g : goals)
      if (g.effect == effect)
        return g.dist_now < g.dist_trial_start ? GoalTrend::Closer
                                               : GoalTrend::Farther;
    return GoalTrend::Farther;
  }

  std::string context_out_() const {
    const SchemaNode& c = net_->schema(cfg_.context_schema);
    return cfg_.context_schema + "." + c.outputs.at(0).name;
  }

  int& free_mod_channels(const std::string& schema) {
    net_->schema_id(schema);  // must exist
    auto it = mod_free_.find(schema);
    if (it == mod_free_.end())
      it = mod_free_.emplace(schema, cfg_.mod_channels_per_schema).first;
    return it->second;
  }

  struct GoalBinding {
    std::string node;
    std::shared_ptr<GoalSchema> goal;
  };

  Network* net_;
  ConstructorConfig cfg_;
  std::shared_ptr<bool> duals_enabled_;
  std::map<std::string, GoalBinding> goals_;
  std::map<std::string, SchemaPair> pairs_;
  std::map<std::string, int> mod_free_;
  std::vector<ConstructionRecord> records_;
  std::vector<IncoherenceEvent> unhandled_;
};

}  // namespace sbl
