#pragma once

#include <cstdint>
#include <random>

// Deterministic randomness helpers. All simulation components draw from
// std::mt19937_64 and map its raw output themselves; std::*_distribution is
// avoided because its output is implementation-defined and would break
// bit-identical runs across platforms.

namespace nebula::rng {

using Engine = std::mt19937_64;

// splitmix64 finalizer; used to derive independent per-subsystem seeds
// from one experiment seed.
inline constexpr uint64_t mix(uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr uint64_t derive_seed(uint64_t base, uint64_t stream) noexcept {
  return mix(base ^ mix(stream));
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Engine& e) {
  return static_cast<double>(e() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& e, double lo, double hi) {
  return lo + (hi - lo) * uniform01(e);
}

// Uniform integer in [0, n). Modulo bias is ~2^-64 per draw, irrelevant here.
inline uint64_t uniform_below(Engine& e, uint64_t n) {
  return e() % n;
}

inline uint8_t uniform_byte(Engine& e) {
  return static_cast<uint8_t>(e() & 0xff);
}

}  // namespace nebula::rng
