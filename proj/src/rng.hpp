#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace rankvocab {

// Counter-based generator (SplitMix64 over a mixed key). Streams are keyed by
// (seed, stream id, ...), so every consumer draws from its own sequence and
// results do not depend on evaluation order.
class CounterRng {
 public:
  explicit CounterRng(uint64_t key) : key_(key) {}

  static CounterRng keyed(uint64_t seed, std::initializer_list<uint64_t> ids) {
    uint64_t k = mix(seed ^ 0x243f6a8885a308d3ull);
    for (uint64_t id : ids) k = mix(k ^ mix(id + 0x9e3779b97f4a7c15ull));
    return CounterRng(k);
  }

  uint64_t next_u64() {
    counter_++;
    return mix(key_ + counter_ * 0x9e3779b97f4a7c15ull);
  }

  /// Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, n). n must be > 0.
  uint64_t below(uint64_t n) {
    return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

 private:
  static uint64_t mix(uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  uint64_t key_;
  uint64_t counter_ = 0;
};

// Stream ids used to key independent RNG streams off one global seed.
namespace streams {
inline constexpr uint64_t kEmbedInit = 1;
inline constexpr uint64_t kParamInit = 2;
inline constexpr uint64_t kShuffle = 3;
inline constexpr uint64_t kDropout = 4;
inline constexpr uint64_t kGradCheck = 5;
inline constexpr uint64_t kSynth = 6;
}  // namespace streams

template <typename T>
void shuffle_in_place(std::vector<T>& v, CounterRng& rng) {
  for (size_t i = v.size(); i > 1; i--) {
    size_t j = static_cast<size_t>(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace rankvocab
