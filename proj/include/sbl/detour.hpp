#pragma once

// Learning-to-detour scenario: a frog agent on a 2-D plane, prey behind a
// pailing-fence barrier, heading-map field integration, an innate
// bump-avoid reflex, and the structural-learning loop that turns repeated
// frontal bumping into an anticipatory sidestep detour.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sbl/activity.hpp"
#include "sbl/cause_effect.hpp"
#include "sbl/constructor.hpp"
#include "sbl/drives.hpp"
#include "sbl/errors.hpp"
#include "sbl/goals.hpp"
#include "sbl/network.hpp"
#include "sbl/predictive.hpp"
#include "sbl/rng.hpp"

namespace sbl::detour {

struct DetourConfig {
  // world geometry (cm): frog starts at origin heading +y, prey up-field,
  // fence between them
  int bins = 64;                   // heading raster resolution over +-180 deg
  double barrier_y = 20.0;
  double barrier_halfwidth = 5.0;  // 5 -> 10 cm fence, 10 -> 20 cm fence
  double prey_x = 0.0, prey_y = 35.0;

  // perceptual fields
  double sigma_bins = 3.0;         // attractant width
  double attr_trunc_sigmas = 2.5;  // attractant support cutoff
  double amp_dist_scale = 20.0;    // amplitude = 1 / (1 + dist/scale)
  double repellent_depth = 1.2;    // must dominate attractant head-on
  int repellent_pad_bins = 3;      // shadow extends past the posts
  double notch_floor = 0.32;       // see-through slit at the prey bearing

  // kinematics
  double fw_step = 4.0, side_step = 3.0, back_step = 4.0;
  double orient_step_deg = 15.0;
  double fw_align_deg = 9.0;  // advance only when nearly facing the winner bin
  // Saccade-and-settle: percepts take a few ticks to flow through the
  // schema pipeline, so a turn is followed by a pause instead of chaining
  // stale turns into an oscillation.
  int orient_cooldown_ticks = 3;
  double snap_radius = 5.0;
  int backup_count = 2;
  // Contact episode, two phases: while braced the body is rigid (the reflex
  // sequence plays out with the heading frozen), then a fixation window lets
  // the animal re-aim at the prey before locomotion resumes.
  int brace_base_ticks = 7;  // + chain length, covers the queued reflex
  int fixate_ticks = 7;

  // motor rasters / arbitration
  double side_amp = 0.6, side_sigma_bins = 2.0;
  double intent_amp = 0.8;
  double exec_threshold = 0.05;    // raster commands below this are noise

  // drive (hunger) dynamics
  double drive_init = 0.55, drive_alpha = 0.001, drive_max = 1.0;
  double incentive_bump = 0.02;    // arousal per barrier contact
  double consume = 0.8;            // reduction on capture
  double chain_base_drive = 0.66;  // reflex sidestep chain grows with drive
  double chain_step_drive = 0.10;
  int chain_max = 4;

  // goal schema
  double goal_amp = 0.8;
  double goal_drive_min = 0.1;

  // cause-effect monitoring + construction
  double ce_alpha = 0.1, ce_beta = 0.16, ce_threshold = 0.3;
  double ce_theta = 0.005;         // above the shadowed residual, below a lobe
  int ce_max_lag = 4;
  double shortfall_gate = 0.60;  // a plainly visible prey lobe closes the dual
  double replay_lr = 0.05;
  int replay_epochs = 300;
  double online_pred_lr = 0.02;
  double distal_lr = 0.005, distal_step = 0.1;
  double init_scale = 0.1;         // seed-dependent map initialization

  int trial_ticks = 150;
  bool learning = true;            // constructor active
};

struct Pose {
  double x = 0.0, y = 0.0;
  double heading = 90.0;  // degrees, world frame; +y is 90
};

struct TrialOutcome {
  std::vector<Pose> path;
  int bumps = 0;
  bool captured = false;
  int ticks = 0;
  long long construction_tick = -1;  // scenario tick; -1 = none this trial
};

inline double wrap_deg(double a) {
  while (a >= 180.0) a -= 360.0;
  while (a < -180.0) a += 360.0;
  return a;
}

inline double deg2rad(double d) { return d * 3.14159265358979323846 / 180.0; }

// 2-D world state plus the body: geometry queries for the perceptual
// schemas, guarded motion for the motor side.
class DetourWorld {
 public:
  explicit DetourWorld(const DetourConfig& cfg) : cfg_(cfg) {
    drive_.level = cfg.drive_init;
    drive_.d_max = cfg.drive_max;
    drive_.alpha = cfg.drive_alpha;
    reset_trial();
  }

  void reset_trial() {
    pose_ = Pose{};
    tactile_ = false;
    captured_ = false;
    bumps_ = 0;
    brace_ = 0;
    fix_ = 0;
    cool_ = 0;
  }

  const Pose& pose() const { return pose_; }
  bool tactile() const { return tactile_; }
  bool captured() const { return captured_; }
  int bumps() const { return bumps_; }
  double drive() const { return drive_.level; }

  double bin_width() const { return 360.0 / cfg_.bins; }
  double bin_center(int i) const { return -180.0 + (i + 0.5) * bin_width(); }
  int bin_of(double angle) const {
    int i = static_cast<int>(std::floor((wrap_deg(angle) + 180.0) / bin_width()));
    return std::clamp(i, 0, cfg_.bins - 1);
  }

  double prey_distance() const {
    return std::hypot(cfg_.prey_x - pose_.x, cfg_.prey_y - pose_.y);
  }

  double prey_bearing_rel() const {
    const double world =
        std::atan2(cfg_.prey_y - pose_.y, cfg_.prey_x - pose_.x) * 180.0 / 3.14159265358979323846;
    return wrap_deg(world - pose_.heading);
  }

  // Does the fence cross the line of sight to the prey?  The pailing is
  // visually transparent (the attractant still comes through, with the
  // notch) but this decides shadowing and snap clearance.
  bool prey_shadowed() const {
    return segment_hits_fence(pose_.x, pose_.y, cfg_.prey_x, cfg_.prey_y);
  }

  // Attractant: truncated Gaussian bump over heading bins at the prey
  // bearing, amplitude fading with distance.
  ActivityPattern prey_raster() const {
    ActivityPattern r = zeros(cfg_.bins);
    if (captured_) return r;
    const double bearing = prey_bearing_rel();
    const double amp = 1.0 / (1.0 + prey_distance() / cfg_.amp_dist_scale);
    const double sigma_deg = cfg_.sigma_bins * bin_width();
    const double support = cfg_.attr_trunc_sigmas * sigma_deg;
    for (int i = 0; i < cfg_.bins; ++i) {
      const double d = wrap_deg(bin_center(i) - bearing);
      if (std::abs(d) <= support)
        r[i] = amp * std::exp(-0.5 * (d / sigma_deg) * (d / sigma_deg));
    }
    return r;
  }

  // Repellent: box over the fence's subtended angle (plus padding), with a
  // see-through notch at the prey bearing where the slit between pailings
  // lets the attractant through.
  ActivityPattern sor_raster() const {
    ActivityPattern r = zeros(cfg_.bins);
    const double a1 = post_bearing_rel(-cfg_.barrier_halfwidth);
    const double a2 = post_bearing_rel(+cfg_.barrier_halfwidth);
    const double pad = cfg_.repellent_pad_bins * bin_width();
    for (int i = 0; i < cfg_.bins; ++i) {
      const double c = bin_center(i);
      if (angle_in_arc(c, a1, a2, pad)) r[i] = cfg_.repellent_depth;
    }
    if (prey_shadowed()) r[bin_of(prey_bearing_rel())] = cfg_.notch_floor;
    return r;
  }

  // Motion, all with fence collision handling.
  void forward(double len) { move(len, pose_.heading); }
  void backup(double len) {
    // push straight off the wall rather than along the (possibly turned)
    // body axis, so repeated retreats do not drift around the fence end
    move(len, pose_.y < cfg_.barrier_y ? -90.0 : 90.0);
  }
  void sidestep(double len, int dir) {  // dir +1 = right of heading
    move(len, pose_.heading - 90.0 * dir);
  }
  void orient(double deg) {
    pose_.heading = wrap_deg(pose_.heading + deg);
    cool_ = cfg_.orient_cooldown_ticks;
  }

  bool orient_settling() const { return cool_ > 0; }

  // Brace: reflex in progress, heading frozen.  Hold: brace plus the
  // fixation window; locomotion resumes only after both.
  bool in_brace() const { return brace_ > 0; }
  bool in_reflex_hold() const { return brace_ > 0 || fix_ > 0; }

  bool snap_possible() const {
    return !captured_ && prey_distance() <= cfg_.snap_radius && !prey_shadowed();
  }

  void snap() {
    if (snap_possible()) captured_ = true;
  }

  // One drive update per world tick (Eq-5 dynamics): bumping arouses,
  // capture consumes.
  void update_drive(bool bumped_now) {
    const double reduction = captured_consumed_ ? 0.0 : (captured_ ? cfg_.consume : 0.0);
    if (captured_ && !captured_consumed_) captured_consumed_ = true;
    sbl::update_drive(drive_, reduction, bumped_now ? cfg_.incentive_bump : 0.0);
    if (brace_ > 0)
      --brace_;
    else if (fix_ > 0)
      --fix_;
    if (cool_ > 0) --cool_;
  }

  int reflex_chain() const {
    const int n = 1 + static_cast<int>(std::floor(
                          (drive_.level - cfg_.chain_base_drive) / cfg_.chain_step_drive));
    return std::clamp(n, 1, cfg_.chain_max);
  }

  // Consume and report whether the last motion entered contact.
  bool take_bump_event() {
    const bool b = bump_event_;
    bump_event_ = false;
    return b;
  }

 private:
  double post_bearing_rel(double post_x) const {
    const double world = std::atan2(cfg_.barrier_y - pose_.y, post_x - pose_.x) *
                         180.0 / 3.14159265358979323846;
    return wrap_deg(world - pose_.heading);
  }

  // Is angle c within the arc from a1 to a2 (shortest way), padded?
  static bool angle_in_arc(double c, double a1, double a2, double pad) {
    double span = wrap_deg(a2 - a1);
    double start = a1;
    if (span < 0) {
      start = a2;
      span = -span;
    }
    const double off = wrap_deg(c - start);
    return off >= -pad && off <= span + pad;
  }

  bool segment_hits_fence(double x1, double y1, double x2, double y2) const {
    const double fy = cfg_.barrier_y;
    if ((y1 - fy) * (y2 - fy) > 0.0) return false;  // both on one side
    if (y1 == y2) return false;
    const double t = (fy - y1) / (y2 - y1);
    const double xc = x1 + t * (x2 - x1);
    return std::abs(xc) <= cfg_.barrier_halfwidth;
  }

  void move(double len, double dir_deg) {
    if (captured_) return;
    const double nx = pose_.x + len * std::cos(deg2rad(dir_deg));
    const double ny = pose_.y + len * std::sin(deg2rad(dir_deg));
    if (segment_hits_fence(pose_.x, pose_.y, nx, ny)) {
      // clamp just short of the fence line, on the starting side
      const double gap = 0.5;
      const double t = (cfg_.barrier_y - pose_.y) / (ny - pose_.y);
      pose_.x = pose_.x + t * (nx - pose_.x) * 0.98;
      pose_.y = pose_.y < cfg_.barrier_y ? cfg_.barrier_y - gap : cfg_.barrier_y + gap;
      if (!tactile_) {
        ++bumps_;
        bump_event_ = true;
        brace_ = cfg_.brace_base_ticks + reflex_chain();
        fix_ = cfg_.fixate_ticks;
      }
      tactile_ = true;
    } else {
      pose_.x = nx;
      pose_.y = ny;
      tactile_ = false;
    }
  }

  DetourConfig cfg_;
  Pose pose_;
  DriveState drive_;
  bool tactile_ = false;
  bool captured_ = false;
  bool captured_consumed_ = false;
  int bumps_ = 0;
  bool bump_event_ = false;
  int brace_ = 0;
  int fix_ = 0;
  int cool_ = 0;
};

// Field integration: attractant and repellent combine additively (the
// modulatory/anticipatory input superposes too), then rectify at zero.
inline ActivityPattern integrate_mhm(const ActivityPattern& prey,
                                     const ActivityPattern& sor,
                                     const ActivityPattern& modulatory) {
  if (prey.size() != sor.size() ||
      (!modulatory.empty() && modulatory.size() != prey.size()))
    fail(ErrorCode::DimensionMismatch, "heading-map integration");
  ActivityPattern out(prey.size());
  for (std::size_t i = 0; i < prey.size(); ++i) {
    const double v = prey[i] - sor[i] + (modulatory.empty() ? 0.0 : modulatory[i]);
    out[i] = v > 0.0 ? v : 0.0;
  }
  return out;
}

// Arg-max over the raster scanning frontal bins first, so ties resolve
// toward the smaller turn (and to the right between symmetric lobes).
inline int winner_bin(const ActivityPattern& r) {
  const int n = static_cast<int>(r.size());
  int best = -1;
  double best_v = 0.0;
  const int mid = n / 2;
  for (int k = 0; k < n; ++k) {
    const int i = k % 2 == 0 ? mid + k / 2 : mid - 1 - k / 2;
    if (i < 0 || i >= n) continue;
    if (r[i] > best_v) {
      best_v = r[i];
      best = i;
    }
  }
  return best;  // -1 when the raster is all zeros
}

// The closed-loop scenario: network of schemas around the world, the
// cause-effect monitor, and the constructor.
class DetourScenario {
 public:
  struct TickTrace {
    ActivityPattern mhm;
    ActivityPattern pred;  // forward-model output, zeros before construction
    ActivityPattern sor;
    ActivityPattern goal;
    ActivityPattern side;  // sidestep channel output after any modulation
  };

  // Node behaviors capture `this` and the world by pointer; the scenario
  // must stay where it was built.
  DetourScenario(const DetourScenario&) = delete;
  DetourScenario& operator=(const DetourScenario&) = delete;

  DetourScenario(const DetourConfig& cfg, std::uint64_t seed)
      : cfg_(cfg),
        pool_(seed),
        net_(&pool_),
        world_(cfg),
        monitor_(monitor_config(cfg)),
        ctor_(&net_, ctor_config(cfg)),
        goal_schema_(std::make_shared<GoalSchema>("goal-mhm", 1, cfg.bins)) {
    build_network();
    monitor_.track("SIDE", cfg_.bins, CandidateRole::Cause);
    monitor_.track("BACKUP", 1, CandidateRole::Cause);
    monitor_.track("FORWARD", cfg_.bins, CandidateRole::Cause);
    monitor_.track("ORIENT", cfg_.bins, CandidateRole::Cause);
    monitor_.track("MHM", cfg_.bins, CandidateRole::Effect);
    ctor_.register_goal("MHM", "GOAL_MHM", goal_schema_);
    // Innate taxis consequences are not "new" relations: moving forward or
    // turning toward the winner bin changing the heading map is the innate
    // repertoire, so those pairs never trigger construction.
    known_.insert({"FORWARD", "MHM"});
    known_.insert({"ORIENT", "MHM"});
  }

  const DetourConfig& config() const { return cfg_; }
  DetourWorld& world() { return world_; }
  Network& network() { return net_; }
  SchemaConstructor& constructor() { return ctor_; }
  CauseEffectMonitor& monitor() { return monitor_; }

  TrialOutcome run_trial() {
    world_.reset_trial();
    reflex_->queue.clear();
    reflex_->prev_tactile = false;
    buffer_.clear();
    // Evidence is episodic: one successful burst must carry the relation
    // over threshold, and a trial boundary must not splice last trial's
    // motor tail onto this trial's first percepts.
    monitor_.reset();
    TrialOutcome out;
    trial_traces_.emplace_back();
    double dist_goal_start = -1.0;

    for (int t = 0; t < cfg_.trial_ticks; ++t) {
      net_.step();
      ++scenario_tick_;

      Row row;
      row.mhm = net_.read_port("MHM", "out", 0);
      row.side = net_.read_port("SIDE", "out", 0);
      row.sor = net_.read_port("SOR", "out", 0);
      row.goal = net_.read_port("GOAL_MHM", "out", 0);

      // goal-space distance for the incoherence ledger
      const double dist_goal = mean_sq_diff(row.goal, row.mhm);
      if (dist_goal_start < 0.0 && t == 2) dist_goal_start = dist_goal;

      monitor_.observe("SIDE", row.side);
      monitor_.observe("BACKUP", net_.read_port("BACKUP", "out", 0));
      monitor_.observe("FORWARD", net_.read_port("FORWARD", "out", 0));
      monitor_.observe("ORIENT", net_.read_port("ORIENT", "out", 0));
      monitor_.observe("MHM", row.mhm);
      monitor_.advance();

      if (cfg_.learning) {
        ClassifyInputs ci;
        ci.tick = scenario_tick_;
        for (const auto& rel : monitor_.extract()) {
          if (known_.count({rel.cause, rel.effect})) continue;
          if (ctor_.has_pair(rel.effect, rel.cause)) continue;
          ci.new_relations.push_back(rel);
        }
        if (dist_goal_start >= 0.0)
          ci.goals.push_back({"MHM", dist_goal_start, dist_goal});
        for (SchemaPair* p : ctor_.pairs()) {
          // the model output recorded tau-1 traces back was the forecast
          // for this very tick; score it against what actually arrived
          const auto& tv = trial_traces_.back();
          const int s = static_cast<int>(tv.size()) - p->tau + 1;
          ActivityPattern pred;
          if (s == static_cast<int>(tv.size()))
            pred = net_.read_port(p->predictive_node, "out", 0);
          else if (s >= 0)
            pred = tv[s].pred;
          else
            continue;  // too early in the trial to score the forecast
          PredictionReport pr;
          pr.effect = p->effect;
          pr.cause = p->cause;
          pr.tau = p->tau;
          pr.error_norm = mean_sq_diff(pred, row.mhm);
          pr.cause_active = mean_abs(row.side) > cfg_.ce_theta;
          pr.effect_active = mean_abs(row.mhm) > cfg_.ce_theta;
          ci.predictions.push_back(pr);
        }
        for (const auto& ev : ctor_.classify(ci)) {
          auto rec = ctor_.handle(ev);
          if (rec) {
            constructed_ = &ctor_.pair(rec->trigger.effect, rec->trigger.cause);
            replay_init(*constructed_);
            out.construction_tick = scenario_tick_;
          }
        }
        tune_pairs(row);
      }

      TickTrace tr;
      tr.mhm = row.mhm;
      tr.pred = ctor_.has_pair("MHM", "SIDE")
                    ? net_.read_port(ctor_.pair("MHM", "SIDE").predictive_node, "out", 0)
                    : zeros(cfg_.bins);
      tr.sor = row.sor;
      tr.goal = row.goal;
      tr.side = row.side;
      trial_traces_.back().push_back(std::move(tr));

      buffer_.push_back(std::move(row));
      out.path.push_back(world_.pose());
      out.ticks = t + 1;
      if (world_.captured()) {
        out.captured = true;
        break;
      }
    }
    // The trial that triggered construction is the richest demonstration we
    // will ever get (trap, burst, prey appearing, pursuit), so once it is
    // complete, re-fit the new pair on the whole episode.
    if (constructed_) {
      replay_init(*constructed_);
      constructed_ = nullptr;
    }
    out.bumps = world_.bumps();
    return out;
  }

  std::vector<TrialOutcome> run(int trials) {
    std::vector<TrialOutcome> out;
    for (int i = 0; i < trials; ++i) out.push_back(run_trial());
    return out;
  }

  const std::vector<std::vector<TickTrace>>& traces() const { return trial_traces_; }

  // How many ticks before the real heading map did the forward model light
  // the eventual open-field bearing?  Negative: it never led.
  //
  // The percept onset is the first tick where an off-axis bin stays above
  // lambda for `hold` consecutive ticks: once the prey edge truly clears the
  // occluder the lobe stays up, whereas single-tick glints of partial
  // clipping during the march do not count as arrival.  The forecast onset
  // is its first announcement at that bin — a prediction may flicker with
  // the command stream and still be doing its job.  The first few ticks of
  // a trial are skipped on both streams: the percept pipeline is that deep,
  // so those entries still carry the previous trial's final state.
  int anticipation_lead(int trial, double lambda = 0.02, int hold = 3) const {
    const auto& tr = trial_traces_.at(trial);
    const int n = static_cast<int>(tr.size());
    const int warmup = 4;
    const int bins = cfg_.bins;
    const double offaxis = 20.0;  // the frontal notch residual is not a lobe
    int t_mhm = -1, bstar = -1;
    for (int t = warmup; t + hold <= n && t_mhm < 0; ++t) {
      double best = lambda;
      for (int i = 0; i < bins; ++i) {
        const double c = -180.0 + (i + 0.5) * 360.0 / bins;
        if (std::abs(c) < offaxis) continue;
        bool held = true;
        for (int k = 0; k < hold && held; ++k) held = tr[t + k].mhm[i] > lambda;
        if (held && tr[t].mhm[i] > best) {
          best = tr[t].mhm[i];
          t_mhm = t;
          bstar = i;
        }
      }
    }
    if (t_mhm < 0) return -1;
    // One bin is 360/bins degrees; a forecast lobe centered a single bin
    // away from the percept's onset bin is the same lobe.
    for (int t = warmup; t <= t_mhm; ++t)
      for (int d = -1; d <= 1; ++d)
        if (tr[t].pred[(bstar + d + bins) % bins] > lambda) return t_mhm - t;
    return -1;
  }

 private:
  struct Row {
    ActivityPattern mhm, side, sor, goal;
  };

  struct ReflexState {
    std::deque<char> queue;  // 'b' = backup, 's' = sidestep
    bool prev_tactile = false;
  };

  static CauseEffectConfig monitor_config(const DetourConfig& cfg) {
    CauseEffectConfig mc;
    mc.alpha = cfg.ce_alpha;
    mc.beta = cfg.ce_beta;
    mc.r_threshold = cfg.ce_threshold;
    mc.max_lag = cfg.ce_max_lag;
    mc.theta_act = cfg.ce_theta;
    return mc;
  }

  static ConstructorConfig ctor_config(const DetourConfig& cfg) {
    ConstructorConfig cc;
    cc.theta_act = cfg.exec_threshold;
    cc.shortfall_gate = cfg.shortfall_gate;
    cc.context_schema = "SOR";
    return cc;
  }

  ActivityPattern goal_bump() const {
    ActivityPattern g = zeros(cfg_.bins);
    const double w = 360.0 / cfg_.bins;
    const double sigma = cfg_.sigma_bins * w;
    for (int i = 0; i < cfg_.bins; ++i) {
      const double c = -180.0 + (i + 0.5) * w;
      if (std::abs(c) <= cfg_.attr_trunc_sigmas * sigma)
        g[i] = cfg_.goal_amp * std::exp(-0.5 * (c / sigma) * (c / sigma));
    }
    return g;
  }

  ActivityPattern lobe(double center_deg, double amp, double sigma_bins) const {
    ActivityPattern r = zeros(cfg_.bins);
    const double w = 360.0 / cfg_.bins;
    const double sigma = sigma_bins * w;
    for (int i = 0; i < cfg_.bins; ++i) {
      const double d = wrap_deg((-180.0 + (i + 0.5) * w) - center_deg);
      if (std::abs(d) <= 3.0 * sigma)
        r[i] = amp * std::exp(-0.5 * (d / sigma) * (d / sigma));
    }
    return r;
  }

  void build_network() {
    DetourWorld* w = &world_;
    const DetourConfig cfg = cfg_;
    const int bins = cfg_.bins;
    reflex_ = std::make_shared<ReflexState>();

    auto add_source = [&](const std::string& name, const std::string& kind, int dim,
                          std::function<ActivityPattern()> fn) {
      SchemaNode n;
      n.name = name;
      n.kind = kind;
      n.outputs = {{"out", dim}};
      n.behavior = [fn](const BehaviorContext&) {
        BehaviorResult r;
        r.outputs.push_back(fn());
        return r;
      };
      net_.add_schema(std::move(n));
    };

    add_source("PREY", "perceptual", bins, [w] { return w->prey_raster(); });
    add_source("SOR", "perceptual", bins, [w] { return w->sor_raster(); });
    add_source("TACTILE", "perceptual", 1,
               [w] { return ActivityPattern{w->tactile() ? 1.0 : 0.0}; });
    add_source("DRIVE", "drive", 1, [w] { return ActivityPattern{w->drive()}; });

    auto goal = goal_bump();
    add_source("GOAL_MHM", "goal", bins, [w, cfg, goal]() -> ActivityPattern {
      if (w->captured() || w->drive() < cfg.goal_drive_min)
        return zeros(static_cast<int>(goal.size()));
      return goal;
    });

    {
      SchemaNode n;
      n.name = "MHM";
      n.kind = "sensorimotor";
      n.inputs = {{"prey", bins}, {"sor", bins}, {"mod", bins}};
      n.outputs = {{"out", bins}};
      n.behavior = [](const BehaviorContext& ctx) {
        BehaviorResult r;
        r.outputs.push_back(integrate_mhm(ctx.in(0), ctx.in(1), ctx.in(2)));
        return r;
      };
      net_.add_schema(std::move(n));
    }
    net_.connect("PREY.out", "MHM.prey", 0);
    net_.connect("SOR.out", "MHM.sor", 0);
    // MHM.mod stays unconnected: anticipation is read from the forward
    // model's own trace.

    // Innate protective reflex: on contact, back off and sidestep; chain
    // length grows with drive (vigor).
    {
      SchemaNode n;
      n.name = "BUMPAVOID";
      n.kind = "sensorimotor";
      n.inputs = {{"tactile", 1}};
      n.outputs = {{"side_i", bins}, {"back_i", 1}};
      std::shared_ptr<ReflexState> st = reflex_;
      DetourScenario* self = this;
      n.behavior = [st, w, cfg, self](const BehaviorContext& ctx) {
        BehaviorResult r;
        const bool contact = !ctx.in(0).empty() && ctx.in(0)[0] > 0.5;
        const char phase = st->queue.empty() ? ' ' : st->queue.front();
        r.outputs.push_back(phase == 's'
                                ? self->lobe(90.0, cfg.side_amp, cfg.side_sigma_bins)
                                : zeros(cfg.bins));
        r.outputs.push_back(phase == 'b' ? ActivityPattern{1.0}
                                         : ActivityPattern{0.0});
        r.commit = [st, w, cfg, contact] {
          if (!st->queue.empty()) st->queue.pop_front();
          if (contact && !st->prev_tactile && st->queue.empty()) {
            for (int i = 0; i < cfg.backup_count; ++i) st->queue.push_back('b');
            for (int i = 0; i < w->reflex_chain(); ++i) st->queue.push_back('s');
          }
          st->prev_tactile = contact;
        };
        return r;
      };
      net_.add_schema(std::move(n));
    }
    net_.connect("TACTILE.out", "BUMPAVOID.tactile", 0);

    // SIDE: pass-through for the reflex; the constructor later grows a
    // modulatory input here that the dual overrides.
    {
      SchemaNode n;
      n.name = "SIDE";
      n.kind = "motor";
      n.inputs = {{"in", bins}};
      n.outputs = {{"out", bins}};
      n.behavior = [](const BehaviorContext& ctx) {
        BehaviorResult r;
        r.outputs.push_back(ctx.in(0));
        return r;
      };
      net_.add_schema(std::move(n));
    }
    net_.connect("BUMPAVOID.side_i", "SIDE.in", 0);

    {
      SchemaNode n;
      n.name = "BACKUP";
      n.kind = "motor";
      n.inputs = {{"in", 1}};
      n.outputs = {{"out", 1}};
      n.behavior = [](const BehaviorContext& ctx) {
        BehaviorResult r;
        r.outputs.push_back(ctx.in(0));
        return r;
      };
      net_.add_schema(std::move(n));
    }
    net_.connect("BUMPAVOID.back_i", "BACKUP.in", 0);

    // Taxis pair: orient toward the winner bin when the turn is large,
    // advance when it is small.
    auto add_taxis = [&](const std::string& name, bool wants_small_turn) {
      SchemaNode n;
      n.name = name;
      n.kind = "motor";
      n.inputs = {{"mhm", bins}};
      n.outputs = {{"out", bins}};
      DetourScenario* self = this;
      const double align_deg = cfg.fw_align_deg;
      const double amp = cfg.intent_amp;
      n.behavior = [self, wants_small_turn, align_deg, amp, bins](const BehaviorContext& ctx) {
        BehaviorResult r;
        const int wbin = winner_bin(ctx.in(0));
        if (wbin < 0) {
          r.outputs.push_back(zeros(bins));
          return r;
        }
        const double c = -180.0 + (wbin + 0.5) * 360.0 / bins;
        const bool small = std::abs(c) <= align_deg;
        r.outputs.push_back(small == wants_small_turn ? self->lobe(c, amp, 1.5)
                                                      : zeros(bins));
        return r;
      };
      net_.add_schema(std::move(n));
      net_.connect("MHM.out", name + ".mhm", 0);
    };
    add_taxis("FORWARD", true);
    add_taxis("ORIENT", false);

    add_source("SNAP", "motor", 1,
               [w] { return ActivityPattern{w->snap_possible() ? 1.0 : 0.0}; });

    // WORLD: arbitration + physics, applied at commit time.
    {
      SchemaNode n;
      n.name = "WORLD";
      n.kind = "world";
      n.inputs = {{"snap", 1}, {"back", 1}, {"side", bins}, {"orient", bins},
                  {"forward", bins}};
      n.outputs = {{"pose", 3}};
      n.behavior = [w, cfg, bins](const BehaviorContext& ctx) {
        BehaviorResult r;
        r.outputs.push_back(
            ActivityPattern{w->pose().x, w->pose().y, w->pose().heading});
        const bool want_snap = !ctx.in(0).empty() && ctx.in(0)[0] > 0.5;
        const bool want_back = !ctx.in(1).empty() && ctx.in(1)[0] > 0.5;
        const ActivityPattern side = ctx.in(2);
        const ActivityPattern orient = ctx.in(3);
        const ActivityPattern forward = ctx.in(4);
        r.commit = [w, cfg, bins, want_snap, want_back, side, orient, forward] {
          // priority: snap > backup > sidestep > orient > forward
          if (want_snap && w->snap_possible()) {
            w->snap();
          } else if (want_back) {
            w->backup(cfg.back_step);
          } else if (max_abs(side) > cfg.exec_threshold) {
            // The sidestep generator is chirally stereotyped: the protective
            // reflex that exercises it only ever steps to the right, so a
            // modulatory command triggers that same fixed pattern.  Freeing
            // the direction here lets boundary-straddling commands flip it
            // tick by tick, which degenerates into a stationary dither.
            w->sidestep(cfg.side_step, 1);
          } else if (!w->in_brace() && !w->orient_settling() &&
                     max_abs(orient) > cfg.exec_threshold) {
            // re-fixating is allowed once the reflex is done; advancing only
            // after the fixation window
            const int wbin = winner_bin(orient);
            const double c = -180.0 + (wbin + 0.5) * 360.0 / bins;
            w->orient(std::clamp(c, -cfg.orient_step_deg, cfg.orient_step_deg));
          } else if (!w->in_reflex_hold() && !w->orient_settling() &&
                     max_abs(forward) > cfg.exec_threshold) {
            w->forward(cfg.fw_step);
          }
          w->update_drive(w->take_bump_event());
        };
        return r;
      };
      net_.add_schema(std::move(n));
    }
    net_.connect("SNAP.out", "WORLD.snap", 0);
    net_.connect("BACKUP.out", "WORLD.back", 0);
    net_.connect("SIDE.out", "WORLD.side", 0);
    net_.connect("ORIENT.out", "WORLD.orient", 0);
    net_.connect("FORWARD.out", "WORLD.forward", 0);
  }

  // Behavioral replay: right after construction, fit the new forward and
  // inverse maps to the trajectory that led here, so the next trial starts
  // from the successful pattern instead of from scratch.
  void replay_init(SchemaPair& pair) {
    auto& gen = pool_.stream("detour/replay-init");
    pair.predictive->map().init(gen, cfg_.init_scale);
    pair.dual->map().init(gen, cfg_.init_scale);
    const std::size_t tau = static_cast<std::size_t>(std::max(1, pair.tau));
    if (buffer_.size() <= tau) return;
    for (int epoch = 0; epoch < cfg_.replay_epochs; ++epoch) {
      for (std::size_t t = tau; t < buffer_.size(); ++t) {
        const Row& base = buffer_[t - tau];
        const Row& cur = buffer_[t];
        // the forward model pairs each state+command with the heading map
        // tau ticks later: its output leads the percept by the relation's
        // latency
        pair.predictive->tune(base.mhm, base.side, base.sor, cur.mhm, cfg_.replay_lr);
        // behavioral cloning: ticks where the reflex issued the command are
        // demonstrations; ticks with the prey plainly in view are hard
        // counterexamples (that is where the command must fall silent so
        // pursuit can take over); other quiet ticks (far approach, pauses)
        // are down-weighted so the pause/step duty cycle does not wash the
        // command out of the map
        double w = 0.25;
        if (mean_abs(cur.side) > cfg_.ce_theta) w = 1.0;
        else if (mean_abs(cur.mhm) > 4.0 * cfg_.ce_theta) w = 1.0;
        pair.dual->map().tune_mse(pair.dual->blocks(cur.mhm, cur.goal, cur.sor),
                                  cur.side, w * cfg_.replay_lr);
      }
    }
  }

  // Online parameter learning on every tick after construction.
  void tune_pairs(const Row& row) {
    for (SchemaPair* p : ctor_.pairs()) {
      const std::size_t tau = static_cast<std::size_t>(std::max(1, p->tau));
      if (buffer_.size() < tau) continue;
      const Row& base = buffer_[buffer_.size() - tau];
      const double err = p->predictive->tune(base.mhm, base.side, base.sor,
                                             row.mhm, cfg_.online_pred_lr);
      p->predictive->observe_error(err);
      // distal teaching only on commands whose outcome has now arrived and
      // moved the effect toward the goal; steps that go nowhere must not
      // drag the inverse map around
      if (max_abs(base.side) > cfg_.exec_threshold &&
          mean_abs(row.goal) > cfg_.exec_threshold &&
          mean_abs(row.mhm) > mean_abs(base.mhm) + 1e-4)
        p->dual->distal_tune(*p->predictive, base.mhm, row.goal, base.sor,
                             base.side, row.mhm, cfg_.distal_lr, cfg_.distal_step);
    }
  }

  DetourConfig cfg_;
  RngPool pool_;
  Network net_;
  DetourWorld world_;
  CauseEffectMonitor monitor_;
  SchemaConstructor ctor_;
  std::shared_ptr<GoalSchema> goal_schema_;
  std::shared_ptr<ReflexState> reflex_;
  std::set<std::pair<std::string, std::string>> known_;
  SchemaPair* constructed_ = nullptr;  // pair built this trial, re-fit at end
  std::vector<Row> buffer_;
  std::vector<std::vector<TickTrace>> trial_traces_;
  long long scenario_tick_ = 0;
};

}  // namespace sbl::detour
