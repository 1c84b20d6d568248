#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "sbl/errors.hpp"

namespace sbl {

// A pattern of activity on one port: fixed-length vector of doubles.
using ActivityPattern = std::vector<double>;

inline ActivityPattern zeros(std::size_t n) { return ActivityPattern(n, 0.0); }

inline bool all_finite(const ActivityPattern& p) {
  for (double x : p)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double mean_abs(const ActivityPattern& p) {
  if (p.empty()) return 0.0;
  double s = 0.0;
  for (double x : p) s += std::fabs(x);
  return s / static_cast<double>(p.size());
}

inline double max_abs(const ActivityPattern& p) {
  double m = 0.0;
  for (double x : p) m = std::max(m, std::fabs(x));
  return m;
}

inline bool is_zero(const ActivityPattern& p) {
  for (double x : p)
    if (x != 0.0) return false;
  return true;
}

// Mean squared elementwise difference. Dimensions must agree.
inline double mean_sq_diff(const ActivityPattern& a, const ActivityPattern& b) {
  if (a.size() != b.size())
    fail(ErrorCode::DimensionMismatch, "mean_sq_diff: " + std::to_string(a.size()) + " vs " +
                                           std::to_string(b.size()));
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

// Cosine similarity; 0 when either pattern is all-zero. Dimensions must agree.
inline double cosine(const ActivityPattern& a, const ActivityPattern& b) {
  if (a.size() != b.size())
    fail(ErrorCode::DimensionMismatch, "cosine: " + std::to_string(a.size()) +
                                           " vs " + std::to_string(b.size()));
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace sbl
