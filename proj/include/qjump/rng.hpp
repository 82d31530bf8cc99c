#pragma once

#include <cstdint>
#include <random>

namespace qjump {

/// SplitMix64 finalizer (Steele, Lea & Flood). Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of trajectory `index` in a batch started from `seed0`:
///   seed = mix64(mix64(seed0) XOR index).
/// Distinct indices never collide because XOR with a fixed word and mix64
/// are both bijections. seed0 is mixed first: with a plain seed0 XOR index,
/// batches from seeds 8 and 9 would share all but one trajectory.
constexpr std::uint64_t split_seed(std::uint64_t seed0, std::uint64_t index) noexcept {
  return mix64(mix64(seed0) ^ index);
}

/// Per-trajectory random stream. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; the double conversion is done here so
/// results do not depend on the standard library's distribution code.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double on the open interval (0, 1).
  double uniform() noexcept {
    const std::uint64_t bits = engine_() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace qjump
