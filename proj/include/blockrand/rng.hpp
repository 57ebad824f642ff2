#pragma once

#include <cstdint>

namespace blockrand {

/// splitmix64 finalizer; full-avalanche 64-bit mix.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Seedable, counter-splittable generator (splitmix64 core).
///
/// split(key) derives an independent substream from the current state
/// without advancing it, so per-block and per-replication streams can be
/// keyed by index and results stay identical under any evaluation order.
class SplitRng {
 public:
  static constexpr const char* name = "splitmix64";

  explicit SplitRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Independent substream keyed by (this stream, key).
  SplitRng split(std::uint64_t key) const {
    return SplitRng(mix64(state_ ^ mix64(key ^ 0xa0761d6478bd642full)));
  }

  /// Uniform integer in [0, bound), bound >= 1. Unbiased via rejection.
  std::uint32_t below(std::uint32_t bound) {
    const std::uint64_t threshold = (0 - std::uint64_t(bound)) % bound;
    for (;;) {
      const std::uint64_t draw = next();
      if (draw >= threshold) return static_cast<std::uint32_t>(draw % bound);
    }
  }

  // std::uniform_random_bit_generator interface
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type(0); }
  result_type operator()() { return next(); }

 private:
  std::uint64_t state_;
};

}  // namespace blockrand
