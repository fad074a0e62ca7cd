#pragma once

#include <cmath>
#include <cstdint>

namespace iob {

// splitmix64: 64-bit splittable generator. Streams for independent samples
// are derived by hashing (seed, index), so generation order never matters.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  static Rng stream(uint64_t seed, uint64_t index) {
    Rng r(seed);
    // mix the index through one extra round so adjacent streams decorrelate
    r.state_ = mix(r.state_ + 0x9e3779b97f4a7c15ULL * (index + 1));
    return r;
  }

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive integer range
  int64_t uniform_int(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
  }

  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = uniform(-1.0, 1.0);
      v = uniform(-1.0, 1.0);
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  static constexpr const char* name() { return "splitmix64"; }

 private:
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace iob
