#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace dmib {

// Counter-based deterministic generator (splitmix64 over seed + counter).
// Draw i depends only on (seed, i), so sequences are identical across runs
// and platforms and unaffected by how many other generators exist.
struct RngState {
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;

  std::uint64_t next_u64() {
    std::uint64_t z = seed + (++counter) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [lo, hi], inclusive.
  std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

  // Standard normal via Box-Muller. Consumes two uniforms per call and
  // discards the sine branch to keep the counter advance fixed.
  double next_gaussian() {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Independent stream derived from a base seed and a label, so components
  // (init, masking, dropout, shuffling, noise) never share draws.
  static RngState derive(std::uint64_t base_seed, std::string_view stream) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : stream) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    std::uint64_t z = base_seed ^ h;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return RngState{z ^ (z >> 31), 0};
  }
};

}  // namespace dmib
