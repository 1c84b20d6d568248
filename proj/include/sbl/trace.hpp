#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sbl/activity.hpp"

namespace sbl {

// Shortest round-trip decimal form; locale-independent, so trace bytes are
// reproducible bit-for-bit for a fixed seed.
inline std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void row(long tick, std::string_view schema, std::string_view port,
                   const ActivityPattern& values) = 0;
};

struct TraceRow {
  long tick;
  std::string schema;
  std::string port;
  ActivityPattern values;
};

class MemoryTraceSink : public TraceSink {
 public:
  void row(long tick, std::string_view schema, std::string_view port,
           const ActivityPattern& values) override {
    rows.push_back({tick, std::string(schema), std::string(port), values});
  }
  std::vector<TraceRow> rows;
};

// One JSON object per line: {"tick":..,"schema":"..","port":"..","values":[..]}
class JsonlTraceSink : public TraceSink {
 public:
  explicit JsonlTraceSink(const std::string& path) : out_(path, std::ios::binary) {}

  bool ok() const { return out_.good(); }

  void row(long tick, std::string_view schema, std::string_view port,
           const ActivityPattern& values) override {
    std::string line;
    line.reserve(64 + values.size() * 12);
    line += "{\"tick\":";
    line += std::to_string(tick);
    line += ",\"schema\":\"";
    line += schema;
    line += "\",\"port\":\"";
    line += port;
    line += "\",\"values\":[";
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) line += ',';
      line += format_double(values[i]);
    }
    line += "]}\n";
    out_ << line;
  }

 private:
  std::ofstream out_;
};

}  // namespace sbl
