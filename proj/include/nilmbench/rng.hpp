#pragma once

#include <cstdint>
#include <string_view>

namespace nilmbench {

// Deterministic generator used everywhere randomness is needed. All draws go
// through this wrapper instead of <random> distributions, whose output is
// implementation-defined; runs must reproduce bit-identically from a seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // splitmix64 warm-up so consecutive seeds decorrelate
    next_u64();
    next_u64();
  }

  // Derives an independent sub-stream, e.g. rng.stream("init"), rng.stream("noise").
  Rng stream(std::string_view name) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : name) {
      h ^= static_cast<std::uint8_t>(c);
      h *= 0x100000001b3ULL;
    }
    return Rng(state_ ^ h);
  }

  Rng stream(std::string_view name, std::uint64_t index) const {
    Rng r = stream(name);
    r.state_ ^= 0x9e3779b97f4a7c15ULL * (index + 1);
    r.next_u64();
    return r;
  }

  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // standard normal via Box-Muller; second value cached
  double next_normal();

  double normal(double mean, double stddev) { return mean + stddev * next_normal(); }

  // uniform integer in [0, n)
  std::uint64_t next_below(std::uint64_t n) {
    // modulo bias negligible for n << 2^64
    return next_u64() % n;
  }

 private:
  std::uint64_t state_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace nilmbench
