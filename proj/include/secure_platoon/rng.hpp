#pragma once

#include <cstdint>

namespace secure_platoon {

// Counter-based generator: every draw is a pure function of (seed, stream,
// counter), so traces replay bit for bit regardless of evaluation order and
// parallel replications never share a stream.
namespace rng {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t keyed(std::uint64_t seed, std::uint64_t stream,
                           std::uint64_t counter) {
  return mix64(mix64(mix64(seed) ^ stream) ^ counter);
}

/// Uniform on [-1, 1), 53-bit resolution.
inline double uniform_pm1(std::uint64_t seed, std::uint64_t stream,
                          std::uint64_t counter) {
  return 2.0 * (static_cast<double>(keyed(seed, stream, counter) >> 11) *
                0x1.0p-53) -
         1.0;
}

/// Seed for one replication of a sweep, derived from the master seed.
inline std::uint64_t replication_seed(std::uint64_t master, std::uint64_t rep) {
  return keyed(master, 0x726570ULL, rep);
}

inline std::uint64_t observer_init_stream(int observer) {
  return 0x300u + static_cast<std::uint64_t>(observer);
}

}  // namespace rng
}  // namespace secure_platoon
