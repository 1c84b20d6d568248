#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>

namespace sbl {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// One master seed, split into independent named streams. Each consumer pulls
// from its own stream, so adding a consumer (or a trace sink) never perturbs
// the draws seen by the others.
class RngPool {
 public:
  explicit RngPool(std::uint64_t seed = 0) : seed_(seed) {}

  std::mt19937_64& stream(const std::string& label) {
    auto it = streams_.find(label);
    if (it == streams_.end()) {
      std::mt19937_64 gen(splitmix64(seed_ ^ fnv1a64(label)));
      it = streams_.emplace(label, std::move(gen)).first;
    }
    return it->second;
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::map<std::string, std::mt19937_64> streams_;
};

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

}  // namespace sbl
