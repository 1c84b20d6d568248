#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "sbl/activity.hpp"
#include "sbl/errors.hpp"

namespace sbl {

// Activity gate: a pattern counts as "on" when its mean absolute value
// clears the threshold.
inline double theta_gate(const ActivityPattern& p, double theta_act) {
  return mean_abs(p) > theta_act ? 1.0 : 0.0;
}

// Squared dissimilarity between two patterns.  Commensurable patterns are
// compared element-wise; otherwise the comparison falls back to their
// mean-abs summaries so heterogeneous schemas still repel when only one of
// them is active.
inline double pair_distance(const ActivityPattern& a, const ActivityPattern& b) {
  if (a.size() == b.size()) return mean_sq_diff(a, b);
  const double da = mean_abs(a), db = mean_abs(b);
  return (da - db) * (da - db);
}

// Instantaneous coincidence evidence that `cause_lagged` (the cause schema's
// pattern some lag ago) produced `effect_now`:
//
//   c = Theta[effect_now] * Theta[cause_lagged] - alpha * distance
//
// Both active and alike -> near +1; activity on one side only -> negative;
// both quiet -> near 0.
inline double coincidence(const ActivityPattern& effect_now,
                          const ActivityPattern& cause_lagged, double alpha,
                          double theta_act) {
  return theta_gate(effect_now, theta_act) * theta_gate(cause_lagged, theta_act) -
         alpha * pair_distance(effect_now, cause_lagged);
}

struct CauseEffectConfig {
  double alpha = 1.0;        // dissimilarity penalty weight
  double beta = 0.01;        // reliability accumulation rate
  double r_threshold = 0.3;  // extraction threshold on accumulated reliability
  int max_lag = 8;           // candidate cause->effect delays, in ticks
  double theta_act = 0.05;   // activity gate
  // When true, only pairs whose cause is tracked as a command-side schema
  // and whose effect is tracked as a feedback-side schema are considered;
  // when false every ordered pair competes.
  bool restrict_roles = true;
};

// Which side of a cause-effect relation a tracked schema may occupy.
enum class CandidateRole { Cause, Effect, Both };

struct ExtractedRelation {
  std::string cause;
  std::string effect;
  int lag = 0;
  double reliability = 0.0;
  double margin = 0.0;  // winning-lag reliability minus runner-up lag's
};

// Watches the committed activity patterns of a set of schemas and
// accumulates, for every ordered (cause, effect) pair and every candidate
// lag, a reliability score.  Pairs whose best-lag reliability clears the
// threshold are offered for extraction.
class CauseEffectMonitor {
 public:
  explicit CauseEffectMonitor(CauseEffectConfig cfg = {}) : cfg_(cfg) {
    if (cfg_.max_lag < 0 || cfg_.max_lag > 64)
      fail(ErrorCode::LagBeyondHorizon,
           "cause-effect max_lag " + std::to_string(cfg_.max_lag) +
               " outside retained history [0, 64]");
  }

  const CauseEffectConfig& config() const { return cfg_; }

  void track(const std::string& name, int dim,
             CandidateRole role = CandidateRole::Both) {
    if (index_.count(name))
      fail(ErrorCode::DuplicateName, "cause-effect already tracks " + name);
    index_[name] = static_cast<int>(names_.size());
    names_.push_back(name);
    dims_.push_back(dim);
    roles_.push_back(role);
    current_.emplace_back();
    history_.emplace_back();
    const size_t n = names_.size();
    r_.assign(n * n * static_cast<size_t>(cfg_.max_lag + 1), 0.0);
    ticks_ = 0;  // dimensions changed; start accumulation afresh
    for (auto& h : history_) h.clear();
  }

  // Whether an ordered (cause, effect) pair competes for extraction.
  bool eligible(int cause, int effect) const {
    if (cause == effect) return false;
    if (!cfg_.restrict_roles) return true;
    return roles_[cause] != CandidateRole::Effect &&
           roles_[effect] != CandidateRole::Cause;
  }

  const std::vector<std::string>& tracked() const { return names_; }

  // Stage this tick's committed pattern for one schema.  Unobserved schemas
  // count as quiet (all-zero) for the tick.
  void observe(const std::string& name, const ActivityPattern& pattern) {
    const int i = index_of(name);
    if (static_cast<int>(pattern.size()) != dims_[i])
      fail(ErrorCode::DimensionMismatch,
           "cause-effect " + name + ": pattern dim " +
               std::to_string(pattern.size()) + " != " + std::to_string(dims_[i]));
    current_[i] = pattern;
  }

  // Fold the staged tick into every pair's reliability and rotate history.
  void advance() {
    const int n = static_cast<int>(names_.size());
    for (int i = 0; i < n; ++i)
      if (current_[i].empty()) current_[i] = zeros(dims_[i]);

    for (int e = 0; e < n; ++e) {
      for (int c = 0; c < n; ++c) {
        if (!eligible(c, e)) continue;
        for (int lag = 0; lag <= cfg_.max_lag; ++lag) {
          const ActivityPattern& cause = lagged(c, lag);
          r_[slot(c, e, lag)] +=
              cfg_.beta * coincidence(current_[e], cause, cfg_.alpha, cfg_.theta_act);
        }
      }
    }

    for (int i = 0; i < n; ++i) {
      history_[i].push_front(std::move(current_[i]));
      current_[i] = ActivityPattern{};
      while (static_cast<int>(history_[i].size()) > cfg_.max_lag)
        history_[i].pop_back();
    }
    ++ticks_;
  }

  long long ticks() const { return ticks_; }

  double reliability(const std::string& cause, const std::string& effect,
                     int lag) const {
    if (lag < 0 || lag > cfg_.max_lag)
      fail(ErrorCode::LagBeyondHorizon,
           "reliability lag " + std::to_string(lag) + " > max_lag " +
               std::to_string(cfg_.max_lag));
    return r_[slot(index_of(cause), index_of(effect), lag)];
  }

  // Best lag and its reliability for a pair.  Ties break toward the shorter
  // lag so results are deterministic.
  std::pair<int, double> best_lag(const std::string& cause,
                                  const std::string& effect) const {
    const int c = index_of(cause), e = index_of(effect);
    int best = 0;
    double best_r = r_[slot(c, e, 0)];
    for (int lag = 1; lag <= cfg_.max_lag; ++lag) {
      const double v = r_[slot(c, e, lag)];
      if (v > best_r) {
        best_r = v;
        best = lag;
      }
    }
    return {best, best_r};
  }

  // Eligible pairs strictly above threshold at their best lag, strongest
  // first; one relation per pair.  Ties order by name for determinism.
  std::vector<ExtractedRelation> extract() const {
    std::vector<ExtractedRelation> out;
    const int n = static_cast<int>(names_.size());
    for (int c = 0; c < n; ++c) {
      for (int e = 0; e < n; ++e) {
        if (!eligible(c, e)) continue;
        auto [lag, rel] = best_lag(names_[c], names_[e]);
        if (rel > cfg_.r_threshold) {
          double runner = -1e300;
          for (int l = 0; l <= cfg_.max_lag; ++l)
            if (l != lag) runner = std::max(runner, r_[slot(c, e, l)]);
          const double margin = cfg_.max_lag == 0 ? rel : rel - runner;
          out.push_back({names_[c], names_[e], lag, rel, margin});
        }
      }
    }
    std::sort(out.begin(), out.end(), [](const ExtractedRelation& a,
                                         const ExtractedRelation& b) {
      if (a.reliability != b.reliability) return a.reliability > b.reliability;
      if (a.cause != b.cause) return a.cause < b.cause;
      return a.effect < b.effect;
    });
    return out;
  }

  void reset() {
    std::fill(r_.begin(), r_.end(), 0.0);
    for (auto& h : history_) h.clear();
    for (auto& c : current_) c = ActivityPattern{};
    ticks_ = 0;
  }

 private:
  int index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
      fail(ErrorCode::UnknownPort, "cause-effect does not track " + name);
    return it->second;
  }

  size_t slot(int cause, int effect, int lag) const {
    const size_t n = names_.size();
    return (static_cast<size_t>(effect) * n + static_cast<size_t>(cause)) *
               static_cast<size_t>(cfg_.max_lag + 1) +
           static_cast<size_t>(lag);
  }

  // Pattern the schema committed `lag` ticks before the staged one; quiet
  // zeros before recorded history, matching the kernel's pre-run semantics.
  const ActivityPattern& lagged(int i, int lag) {
    if (lag == 0) return current_[i];
    if (lag <= static_cast<int>(history_[i].size())) return history_[i][lag - 1];
    scratch_ = zeros(dims_[i]);
    return scratch_;
  }

  CauseEffectConfig cfg_;
  std::map<std::string, int> index_;
  std::vector<std::string> names_;
  std::vector<int> dims_;
  std::vector<CandidateRole> roles_;
  std::vector<ActivityPattern> current_;
  std::vector<std::deque<ActivityPattern>> history_;
  std::vector<double> r_;
  ActivityPattern scratch_;
  long long ticks_ = 0;
};

}  // namespace sbl
