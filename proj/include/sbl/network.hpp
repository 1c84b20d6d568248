#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sbl/errors.hpp"
#include "sbl/rng.hpp"
#include "sbl/schema.hpp"
#include "sbl/trace.hpp"

namespace sbl {

struct TickReport {
  long tick = 0;            // clock value after the step completed
  int schemas_evaluated = 0;
};

// Discrete-time schema network with two-phase ticks.
//
// Clock semantics: tick() counts completed steps, starting at 0. The step
// that runs while the clock reads t evaluates every behavior against a frozen
// snapshot and then commits all outputs at once; the committed values are
// "step t+1" values. A connection with delay d hands the destination the
// value the source committed at step (t - d), i.e. delay 0 means "the
// previous step's output". Reads that reach back before step 1 yield zero
// patterns. History is retained for `horizon` steps; anything older is gone
// and asking for it is an error, not a zero.
//
// Because phase 1 reads only committed history and phase 2 commits
// everything simultaneously, evaluation order cannot affect results; a
// property test drives this with random permutations.
class Network {
 public:
  struct Connection {
    int src = -1, src_port = -1, dst = -1, dst_port = -1, delay = 0;
  };

  explicit Network(RngPool* rng = nullptr, int horizon = 64)
      : rng_(rng), horizon_(horizon) {}

  int add_schema(SchemaNode node) {
    guard_mutation("add_schema");
    if (name_to_id_.count(node.name))
      fail(ErrorCode::DuplicateName, "schema '" + node.name + "'");
    const int id = static_cast<int>(schemas_.size());
    name_to_id_[node.name] = id;
    rings_.emplace_back();
    auto& ring = rings_.back();
    ring.resize(node.outputs.size());
    for (std::size_t p = 0; p < node.outputs.size(); ++p)
      ring[p].assign(static_cast<std::size_t>(horizon_) + 1,
                     zeros(static_cast<std::size_t>(node.outputs[p].dim)));
    input_conn_.emplace_back(node.inputs.size(), -1);
    schemas_.push_back(std::move(node));
    return id;
  }

  // Structural adaptation: grow a new (initially unconnected) input port on
  // an existing schema.  Existing port indices are untouched, so a behavior
  // that was written against the old port list keeps working.
  int add_input_port(const std::string& schema_name, PortSpec port) {
    guard_mutation("add_input_port");
    const int id = schema_id(schema_name);
    for (const auto& p : schemas_[id].inputs)
      if (p.name == port.name)
        fail(ErrorCode::DuplicateName,
             schema_name + " already has input port '" + port.name + "'");
    schemas_[id].inputs.push_back(std::move(port));
    input_conn_[id].push_back(-1);
    return static_cast<int>(schemas_[id].inputs.size()) - 1;
  }

  // Structural adaptation: swap a schema's behavior (e.g. wrapping the old
  // one with a modulatory override).  Only legal between ticks.
  void set_behavior(const std::string& schema_name, Behavior b) {
    guard_mutation("set_behavior");
    schemas_[schema_id(schema_name)].behavior = std::move(b);
  }

  // Endpoints are "Schema.port" strings; an input port accepts one driver.
  void connect(const std::string& src, const std::string& dst, int delay = 0) {
    guard_mutation("connect");
    if (delay < 0 || delay > horizon_)
      fail(ErrorCode::LagBeyondHorizon,
           "connection delay " + std::to_string(delay) + " (horizon " +
               std::to_string(horizon_) + ")");
    auto [si, sp] = resolve_port(src, /*output=*/true);
    auto [di, dp] = resolve_port(dst, /*output=*/false);
    const int sdim = schemas_[si].outputs[sp].dim;
    const int ddim = schemas_[di].inputs[dp].dim;
    if (sdim != ddim)
      fail(ErrorCode::TypeMismatch, src + " (dim " + std::to_string(sdim) + ") -> " + dst +
                                        " (dim " + std::to_string(ddim) + ")");
    if (input_conn_[di][dp] >= 0)
      fail(ErrorCode::DuplicateName, "input port already driven: " + dst);
    input_conn_[di][dp] = static_cast<int>(connections_.size());
    connections_.push_back({si, sp, di, dp, delay});
  }

  TickReport step() { return step_impl(nullptr); }

  TickReport step(const std::vector<int>& order) { return step_impl(&order); }

  // Committed pattern from `lag` steps ago (0 = most recent commit).
  const ActivityPattern& read_port(const std::string& schema, const std::string& port,
                                   int lag = 0) const {
    auto [id, p] = resolve_port(schema + "." + port, /*output=*/true);
    return read_ring(id, p, lag);
  }

  long tick() const { return tick_; }
  int horizon() const { return horizon_; }

  bool has_schema(const std::string& name) const { return name_to_id_.count(name) > 0; }

  int schema_id(const std::string& name) const {
    auto it = name_to_id_.find(name);
    if (it == name_to_id_.end()) fail(ErrorCode::UnknownPort, "schema '" + name + "'");
    return it->second;
  }

  SchemaNode& schema(const std::string& name) { return schemas_[schema_id(name)]; }
  const SchemaNode& schema(const std::string& name) const { return schemas_[schema_id(name)]; }
  const std::vector<SchemaNode>& schemas() const { return schemas_; }
  const std::vector<Connection>& connections() const { return connections_; }

  bool port_connected(const std::string& src, const std::string& dst) const {
    auto [si, sp] = resolve_port(src, true);
    auto [di, dp] = resolve_port(dst, false);
    for (const auto& c : connections_)
      if (c.src == si && c.src_port == sp && c.dst == di && c.dst_port == dp) return true;
    return false;
  }

  const std::string& schema_name(int id) const { return schemas_[id].name; }

  void set_trace(TraceSink* sink, std::set<std::string> filter = {}) {
    sink_ = sink;
    trace_filter_ = std::move(filter);
  }

  RngPool* rng_pool() { return rng_; }

 private:
  void guard_mutation(const char* op) const {
    if (in_step_) fail(ErrorCode::MidTickMutation, op);
  }

  std::pair<int, int> resolve_port(const std::string& qualified, bool output) const {
    const auto dot = qualified.find('.');
    if (dot == std::string::npos)
      fail(ErrorCode::UnknownPort, "expected 'Schema.port', got '" + qualified + "'");
    const std::string sname = qualified.substr(0, dot);
    const std::string pname = qualified.substr(dot + 1);
    auto it = name_to_id_.find(sname);
    if (it == name_to_id_.end()) fail(ErrorCode::UnknownPort, "schema '" + sname + "'");
    const auto& ports = output ? schemas_[it->second].outputs : schemas_[it->second].inputs;
    for (std::size_t i = 0; i < ports.size(); ++i)
      if (ports[i].name == pname) return {it->second, static_cast<int>(i)};
    fail(ErrorCode::UnknownPort, qualified + (output ? " (output)" : " (input)"));
  }

  const ActivityPattern& read_ring(int id, int port, int lag) const {
    if (lag < 0 || lag > horizon_)
      fail(ErrorCode::LagBeyondHorizon,
           "lag " + std::to_string(lag) + " (horizon " + std::to_string(horizon_) + ")");
    const long s = tick_ - lag;  // step whose commit we want
    const auto& ring = rings_[id][static_cast<std::size_t>(port)];
    if (s <= 0) {
      static thread_local std::map<std::size_t, ActivityPattern> zero_cache;
      const std::size_t dim = ring[0].size();
      auto it = zero_cache.find(dim);
      if (it == zero_cache.end()) it = zero_cache.emplace(dim, zeros(dim)).first;
      return it->second;
    }
    return ring[static_cast<std::size_t>(s % (horizon_ + 1))];
  }

  TickReport step_impl(const std::vector<int>* order) {
    in_step_ = true;
    const long t = tick_;
    const int n = static_cast<int>(schemas_.size());
    std::vector<BehaviorResult> results(static_cast<std::size_t>(n));
    std::vector<std::vector<ActivityPattern>> staged_inputs(static_cast<std::size_t>(n));

    try {
      for (int k = 0; k < n; ++k) {
        const int id = order ? (*order)[static_cast<std::size_t>(k)] : k;
        auto& node = schemas_[static_cast<std::size_t>(id)];
        auto& inputs = staged_inputs[static_cast<std::size_t>(id)];
        inputs.resize(node.inputs.size());
        for (std::size_t p = 0; p < node.inputs.size(); ++p) {
          const int ci = input_conn_[static_cast<std::size_t>(id)][p];
          if (ci < 0) {
            inputs[p] = zeros(static_cast<std::size_t>(node.inputs[p].dim));
          } else {
            const auto& c = connections_[static_cast<std::size_t>(ci)];
            inputs[p] = read_ring(c.src, c.src_port, c.delay);
          }
        }
        BehaviorContext ctx;
        ctx.tick = t;
        ctx.inputs = &inputs;
        ctx.rng = rng_ ? &rng_->stream("schema/" + node.name) : nullptr;
        BehaviorResult r = node.behavior ? node.behavior(ctx) : BehaviorResult{};
        validate_result(node, r);
        results[static_cast<std::size_t>(id)] = std::move(r);
      }
    } catch (...) {
      in_step_ = false;  // nothing committed; the tick never happened
      throw;
    }

    // Commit phase: all outputs land at once, then state-update actions run
    // in registration order, then the clock advances.
    const long s_new = t + 1;
    for (int id = 0; id < n; ++id) {
      auto& node = schemas_[static_cast<std::size_t>(id)];
      auto& r = results[static_cast<std::size_t>(id)];
      for (std::size_t p = 0; p < node.outputs.size(); ++p)
        rings_[static_cast<std::size_t>(id)][p][static_cast<std::size_t>(s_new % (horizon_ + 1))] =
            std::move(r.outputs[p]);
      node.activity = r.activity >= 0.0 ? clamp01(r.activity) : derived_activity(id, s_new);
    }
    for (int id = 0; id < n; ++id) {
      auto& r = results[static_cast<std::size_t>(id)];
      if (r.commit) r.commit();
    }
    tick_ = s_new;
    in_step_ = false;

    if (sink_) emit_trace(s_new);
    return {s_new, n};
  }

  void validate_result(const SchemaNode& node, BehaviorResult& r) const {
    if (r.outputs.size() != node.outputs.size())
      fail(ErrorCode::DimensionMismatch,
           node.name + ": behavior produced " + std::to_string(r.outputs.size()) +
               " outputs, schema declares " + std::to_string(node.outputs.size()));
    for (std::size_t p = 0; p < r.outputs.size(); ++p) {
      if (static_cast<int>(r.outputs[p].size()) != node.outputs[p].dim)
        fail(ErrorCode::DimensionMismatch,
             node.name + "." + node.outputs[p].name + ": dim " +
                 std::to_string(r.outputs[p].size()) + " != " +
                 std::to_string(node.outputs[p].dim));
      if (!all_finite(r.outputs[p]))
        fail(ErrorCode::BehaviorPanic, node.name + " (non-finite value on port '" +
                                           node.outputs[p].name + "')");
    }
  }

  double derived_activity(int id, long s) const {
    double m = 0.0;
    for (std::size_t p = 0; p < schemas_[static_cast<std::size_t>(id)].outputs.size(); ++p)
      m = std::max(m, max_abs(rings_[static_cast<std::size_t>(id)][p]
                                    [static_cast<std::size_t>(s % (horizon_ + 1))]));
    return clamp01(m);
  }

  void emit_trace(long s) {
    for (std::size_t id = 0; id < schemas_.size(); ++id) {
      const auto& node = schemas_[id];
      for (std::size_t p = 0; p < node.outputs.size(); ++p) {
        if (!trace_filter_.empty() && !trace_filter_.count(node.name) &&
            !trace_filter_.count(node.name + "." + node.outputs[p].name))
          continue;
        sink_->row(s, node.name, node.outputs[p].name,
                   rings_[id][p][static_cast<std::size_t>(s % (horizon_ + 1))]);
      }
    }
  }

  RngPool* rng_ = nullptr;
  int horizon_ = 64;
  long tick_ = 0;
  bool in_step_ = false;
  std::vector<SchemaNode> schemas_;
  std::vector<Connection> connections_;
  std::vector<std::vector<int>> input_conn_;  // [schema][input port] -> connection index
  std::vector<std::vector<std::vector<ActivityPattern>>> rings_;  // [schema][port][slot]
  std::map<std::string, int> name_to_id_;
  TraceSink* sink_ = nullptr;
  std::set<std::string> trace_filter_;
};

}  // namespace sbl
