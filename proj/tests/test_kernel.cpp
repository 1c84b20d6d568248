#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "sbl/network.hpp"

using namespace sbl;

namespace {

SchemaNode constant_source(const std::string& name, double base) {
  SchemaNode n;
  n.name = name;
  n.kind = "test";
  n.outputs = {{"out", 1}};
  n.behavior = [base](const BehaviorContext& ctx) {
    BehaviorResult r;
    // committed value equals the step index it lands on, offset by base
    r.outputs = {{base + static_cast<double>(ctx.tick + 1)}};
    return r;
  };
  return n;
}

SchemaNode recorder(const std::string& name, std::vector<std::pair<long, double>>* log) {
  SchemaNode n;
  n.name = name;
  n.kind = "test";
  n.inputs = {{"in", 1}};
  n.outputs = {{"out", 1}};
  n.behavior = [log](const BehaviorContext& ctx) {
    log->push_back({ctx.tick, ctx.in(0)[0]});
    BehaviorResult r;
    r.outputs = {ctx.in(0)};
    return r;
  };
  return n;
}

}  // namespace

TEST(Kernel, DelayZeroReadsPreviousStepCommit) {
  Network net;
  net.add_schema(constant_source("A", 0.0));
  std::vector<std::pair<long, double>> log;
  net.add_schema(recorder("B", &log));
  net.connect("A.out", "B.in", 0);

  for (int i = 0; i < 5; ++i) net.step();

  // While the clock reads t, B sees what A committed at step t: one step of
  // transport even at delay 0.
  ASSERT_EQ(log.size(), 5u);
  EXPECT_EQ(log[0], (std::pair<long, double>{0, 0.0}));  // nothing committed yet
  EXPECT_EQ(log[1], (std::pair<long, double>{1, 1.0}));
  EXPECT_EQ(log[4], (std::pair<long, double>{4, 4.0}));
}

TEST(Kernel, DelayThreeAtClockTenSeesStepSeven) {
  Network net;
  net.add_schema(constant_source("SRC", 0.0));
  std::vector<std::pair<long, double>> log;
  net.add_schema(recorder("DST", &log));
  net.connect("SRC.out", "DST.in", 3);

  for (int i = 0; i < 12; ++i) net.step();

  for (const auto& [t, v] : log) {
    if (t == 10) EXPECT_DOUBLE_EQ(v, 7.0);
    if (t < 3) EXPECT_DOUBLE_EQ(v, 0.0);  // reaches before step 1 -> zero pattern
  }
}

TEST(Kernel, DelayCorrectnessPropertyRandomSignals) {
  // For any connection with delay k, the destination's snapshot while the
  // clock reads t equals the source's commit at step t-k, for all t >= k.
  std::mt19937_64 gen(1234);
  for (int trial = 0; trial < 10; ++trial) {
    const int k = static_cast<int>(gen() % 9);
    Network net;
    SchemaNode src;
    src.name = "S";
    src.outputs = {{"out", 1}};
    std::vector<double> committed{0.0};  // committed[s] = value at step s
    src.behavior = [&gen, &committed](const BehaviorContext&) {
      const double v = std::uniform_real_distribution<double>(-1, 1)(gen);
      committed.push_back(v);
      BehaviorResult r;
      r.outputs = {{v}};
      return r;
    };
    net.add_schema(src);
    std::vector<std::pair<long, double>> log;
    net.add_schema(recorder("D", &log));
    net.connect("S.out", "D.in", k);
    for (int i = 0; i < 40; ++i) net.step();
    for (const auto& [t, v] : log) {
      const long s = t - k;
      if (s >= 1) EXPECT_DOUBLE_EQ(v, committed[static_cast<std::size_t>(s)]);
      else EXPECT_DOUBLE_EQ(v, 0.0);
    }
  }
}

TEST(Kernel, ReadPortLagSemantics) {
  Network net(nullptr, 8);
  net.add_schema(constant_source("A", 0.0));
  EXPECT_DOUBLE_EQ(net.read_port("A", "out", 0)[0], 0.0);  // before any step

  net.step();
  EXPECT_DOUBLE_EQ(net.read_port("A", "out", 0)[0], 1.0);  // last committed
  EXPECT_DOUBLE_EQ(net.read_port("A", "out", 1)[0], 0.0);  // beyond recorded history

  for (int i = 0; i < 6; ++i) net.step();
  EXPECT_DOUBLE_EQ(net.read_port("A", "out", 0)[0], 7.0);
  EXPECT_DOUBLE_EQ(net.read_port("A", "out", 3)[0], 4.0);
  EXPECT_THROW(net.read_port("A", "out", 9), SblError);  // lag > horizon

  try {
    net.read_port("A", "out", 9);
  } catch (const SblError& e) {
    EXPECT_EQ(e.code(), ErrorCode::LagBeyondHorizon);
  }
}

TEST(Kernel, HistoryHorizonKeepsSixtyFourTicks) {
  Network net;  // default horizon 64
  net.add_schema(constant_source("A", 0.0));
  for (int i = 0; i < 200; ++i) net.step();
  EXPECT_DOUBLE_EQ(net.read_port("A", "out", 64)[0], 136.0);
  EXPECT_THROW(net.read_port("A", "out", 65), SblError);
}

TEST(Kernel, DuplicateSchemaNameRejected) {
  Network net;
  net.add_schema(constant_source("A", 0.0));
  try {
    net.add_schema(constant_source("A", 1.0));
    FAIL() << "expected DuplicateName";
  } catch (const SblError& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateName);
  }
}

TEST(Kernel, UnknownPortAndTypeMismatch) {
  Network net;
  net.add_schema(constant_source("A", 0.0));
  SchemaNode wide;
  wide.name = "W";
  wide.inputs = {{"in", 3}};
  wide.outputs = {{"out", 3}};
  wide.behavior = [](const BehaviorContext& ctx) {
    BehaviorResult r;
    r.outputs = {ctx.in(0)};
    return r;
  };
  net.add_schema(wide);

  try {
    net.connect("A.nope", "W.in");
    FAIL();
  } catch (const SblError& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownPort);
  }
  try {
    net.connect("A.out", "W.in");  // dim 1 -> dim 3
    FAIL();
  } catch (const SblError& e) {
    EXPECT_EQ(e.code(), ErrorCode::TypeMismatch);
  }
}

TEST(Kernel, NonFinitePanicAbortsTickWithoutCommit) {
  Network net;
  net.add_schema(constant_source("A", 0.0));
  SchemaNode bad;
  bad.name = "NAN";
  bad.outputs = {{"out", 1}};
  int calls = 0;
  bad.behavior = [&calls](const BehaviorContext&) {
    ++calls;
    BehaviorResult r;
    r.outputs = {{calls >= 3 ? std::nan("") : 1.0}};
    return r;
  };
  net.add_schema(bad);

  net.step();
  net.step();
  EXPECT_EQ(net.tick(), 2);
  const double a_before = net.read_port("A", "out", 0)[0];

  try {
    net.step();
    FAIL() << "expected BehaviorPanic";
  } catch (const SblError& e) {
    EXPECT_EQ(e.code(), ErrorCode::BehaviorPanic);
    EXPECT_NE(std::string(e.what()).find("NAN"), std::string::npos);
  }
  // the aborted tick never happened
  EXPECT_EQ(net.tick(), 2);
  EXPECT_DOUBLE_EQ(net.read_port("A", "out", 0)[0], a_before);
}

TEST(Kernel, MidTickMutationRejected) {
  Network net;
  SchemaNode meddler;
  meddler.name = "M";
  meddler.outputs = {{"out", 1}};
  Network* self = &net;
  meddler.behavior = [self](const BehaviorContext&) {
    self->add_schema(constant_source("X", 0.0));  // illegal: structure is frozen mid-tick
    BehaviorResult r;
    r.outputs = {{0.0}};
    return r;
  };
  net.add_schema(meddler);
  try {
    net.step();
    FAIL();
  } catch (const SblError& e) {
    EXPECT_EQ(e.code(), ErrorCode::MidTickMutation);
  }
  EXPECT_EQ(net.tick(), 0);
}

TEST(Kernel, EvaluationOrderNeverChangesCommits) {
  // Build the same randomly wired network twice; step one in registration
  // order and the other under per-tick random permutations. Commits and the
  // full lag-history must agree exactly.
  auto build = [](Network& net) {
    const int n = 8;
    for (int i = 0; i < n; ++i) {
      SchemaNode node;
      node.name = "N" + std::to_string(i);
      node.inputs = {{"a", 1}, {"b", 1}};
      node.outputs = {{"out", 1}};
      const double bias = 0.1 * (i + 1);
      node.behavior = [bias](const BehaviorContext& ctx) {
        BehaviorResult r;
        r.outputs = {{bias + 0.7 * ctx.in(0)[0] - 0.3 * ctx.in(1)[0]}};
        return r;
      };
      net.add_schema(node);
    }
    std::mt19937_64 wire(99);
    for (int i = 0; i < n; ++i) {
      net.connect("N" + std::to_string((i + 1) % n) + ".out", "N" + std::to_string(i) + ".a",
                  static_cast<int>(wire() % 4));
      net.connect("N" + std::to_string((i + 3) % n) + ".out", "N" + std::to_string(i) + ".b",
                  static_cast<int>(wire() % 4));
    }
  };

  Network plain, shuffled;
  build(plain);
  build(shuffled);
  std::mt19937_64 perm(7);
  std::vector<int> order(8);
  std::iota(order.begin(), order.end(), 0);

  for (int t = 0; t < 60; ++t) {
    plain.step();
    std::shuffle(order.begin(), order.end(), perm);
    shuffled.step(order);
    for (int i = 0; i < 8; ++i) {
      const std::string name = "N" + std::to_string(i);
      EXPECT_EQ(plain.read_port(name, "out", 0), shuffled.read_port(name, "out", 0));
    }
  }
}

TEST(Kernel, MutualConnectionSwapsValues) {
  Network net;
  auto relay = [&](const std::string& name, double init) {
    SchemaNode n;
    n.name = name;
    n.inputs = {{"in", 1}};
    n.outputs = {{"out", 1}};
    n.behavior = [init](const BehaviorContext& ctx) {
      BehaviorResult r;
      r.outputs = {ctx.tick == 0 ? ActivityPattern{init} : ctx.in(0)};
      return r;
    };
    net.add_schema(n);
  };
  relay("A", 1.0);
  relay("B", 2.0);
  net.connect("A.out", "B.in", 0);
  net.connect("B.out", "A.in", 0);

  net.step();  // A=1, B=2
  net.step();  // swapped
  EXPECT_DOUBLE_EQ(net.read_port("A", "out", 0)[0], 2.0);
  EXPECT_DOUBLE_EQ(net.read_port("B", "out", 0)[0], 1.0);
  net.step();
  EXPECT_DOUBLE_EQ(net.read_port("A", "out", 0)[0], 1.0);
  EXPECT_DOUBLE_EQ(net.read_port("B", "out", 0)[0], 2.0);
}

TEST(Kernel, TraceSinkReceivesFilteredRows) {
  Network net;
  net.add_schema(constant_source("A", 0.0));
  net.add_schema(constant_source("B", 10.0));
  MemoryTraceSink sink;
  net.set_trace(&sink, {"A"});
  net.step();
  net.step();
  ASSERT_EQ(sink.rows.size(), 2u);
  EXPECT_EQ(sink.rows[0].schema, "A");
  EXPECT_EQ(sink.rows[0].port, "out");
  EXPECT_EQ(sink.rows[0].tick, 1);
  EXPECT_DOUBLE_EQ(sink.rows[1].values[0], 2.0);
}

TEST(Kernel, ActivityDefaultsToClampedMaxAbs) {
  Network net;
  SchemaNode n;
  n.name = "A";
  n.outputs = {{"out", 2}};
  n.behavior = [](const BehaviorContext&) {
    BehaviorResult r;
    r.outputs = {{0.25, -3.0}};
    return r;
  };
  net.add_schema(n);
  net.step();
  EXPECT_DOUBLE_EQ(net.schema("A").activity, 1.0);  // |−3| clamped to 1
}
