#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace aldist {

// SplitMix64 finalizer. Full-avalanche mixing of one 64-bit word.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based generator: every draw is a pure function of the seed and a
// small key tuple, so draws are reproducible under any evaluation order or
// thread schedule. Keys used by the sampler: (stream, user, item, slot).
class counter_rng {
 public:
  explicit counter_rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t word(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                     std::uint64_t d = 0) const {
    std::uint64_t h = mix64(seed_);
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    h = mix64(h ^ c);
    h = mix64(h ^ d);
    return h;
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                 std::uint64_t d = 0) const {
    return static_cast<double>(word(a, b, c, d) >> 11) * 0x1.0p-53;
  }

  // Derive an independent sub-seed (per trial, per experiment, ...).
  std::uint64_t derive(std::uint64_t a, std::uint64_t b = 0) const {
    return word(0x5eedULL, a, b);
  }

 private:
  std::uint64_t seed_;
};

// Stream tags keep the key spaces of distinct draw kinds disjoint.
namespace rng_stream {
constexpr std::uint64_t component = 1;
constexpr std::uint64_t pair = 2;
constexpr std::uint64_t label = 3;
constexpr std::uint64_t test = 4;
}  // namespace rng_stream

// Inverse-CDF lookup. cdf must be nondecreasing with back() ~ 1.
inline std::size_t pick_from_cdf(const std::vector<double>& cdf, double u) {
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  std::size_t i = static_cast<std::size_t>(it - cdf.begin());
  return std::min(i, cdf.size() - 1);
}

}  // namespace aldist
