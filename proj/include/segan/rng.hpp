#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace segan {

// PCG32 with an explicit, serializable two-word state. Every random draw in
// the project goes through this type so that runs are bit-reproducible across
// processes and so checkpoints can capture the sampler mid-stream.
class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(uint64_t seed, uint64_t stream = 0) {
    state_ = 0;
    inc_ = (stream << 1u) | 1u;
    next_u32();
    state_ += seed;
    next_u32();
  }

  uint32_t next_u32() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  uint64_t next_u64() {
    uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Uniform integer in [0, n). Lemire's method with rejection, bias-free.
  int below(int n) {
    uint32_t range = static_cast<uint32_t>(n);
    uint64_t m = static_cast<uint64_t>(next_u32()) * range;
    auto lo = static_cast<uint32_t>(m);
    if (lo < range) {
      uint32_t threshold = -range % range;
      while (lo < threshold) {
        m = static_cast<uint64_t>(next_u32()) * range;
        lo = static_cast<uint32_t>(m);
      }
    }
    return static_cast<int>(m >> 32);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Standard normal via Box-Muller; the second variate is discarded so the
  // generator state never carries hidden caches.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  std::pair<uint64_t, uint64_t> state() const { return {state_, inc_}; }
  void set_state(std::pair<uint64_t, uint64_t> s) {
    state_ = s.first;
    inc_ = s.second;
  }

 private:
  uint64_t state_ = 0;
  uint64_t inc_ = 1;
};

}  // namespace segan
