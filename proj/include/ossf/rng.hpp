#pragma once

// Counter-based random streams. Every stream is a pure function of
// (key, counter), so draws are reproducible independently of execution
// order and thread count.

#include <cmath>
#include <cstdint>

namespace ossf {

namespace detail {
inline uint64_t mix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

class CounterRng {
 public:
  explicit CounterRng(uint64_t key) : key_(key) {}

  /// Stream keyed by (master seed, cell index, replicate index).
  static CounterRng stream(uint64_t master_seed, uint64_t cell,
                           uint64_t replicate) {
    uint64_t k = detail::mix64(master_seed);
    k = detail::mix64(k ^ (cell + 0xA5A5A5A5A5A5A5A5ULL));
    k = detail::mix64(k ^ (replicate + 0x0F0F0F0F0F0F0F0FULL));
    return CounterRng(k);
  }

  uint64_t next_u64() { return detail::mix64(key_ + 0xD1B54A32D192ED03ULL * ++ctr_); }

  /// Uniform in the open interval (0, 1).
  double next_uniform() {
    const double u = (next_u64() >> 11) * 0x1.0p-53;
    if (u <= 0.0) return 0x1.0p-53;
    return u;
  }

  /// Standard normal via Box-Muller (pairs cached).
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /// Exp(1) draw.
  double next_exponential() { return -std::log(next_uniform()); }

 private:
  uint64_t key_;
  uint64_t ctr_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ossf
