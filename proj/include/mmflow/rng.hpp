#pragma once

#include <cstdint>
#include <string_view>

namespace mmflow {

// SplitMix64 stream. Small, portable and bit-stable across platforms and
// standard libraries, which is what keeps simulation output byte-reproducible.
// Substreams are derived from a root seed plus a string key (e.g. a node id),
// so the order in which nodes are processed cannot change their draws.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(mix(seed)) {}

  RngStream(std::uint64_t root_seed, std::string_view key)
      : state_(mix(root_seed ^ mix(fnv1a(key)))) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased uniform integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t bound = n * ((~std::uint64_t{0}) / n);
    std::uint64_t x = next_u64();
    while (x >= bound) x = next_u64();
    return x % n;
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace mmflow
