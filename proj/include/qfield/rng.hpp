#pragma once

#include <cmath>
#include <cstdint>

#include "qfield/lattice.hpp"

namespace qfield {

// Counter-based generation: every draw is a pure function of
// (stream seed, cell coordinate [, level]). Replicates and frozen pasts are
// separate streams derived from the base seed, so results are independent of
// evaluation order and thread scheduling.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class StreamRole : std::uint64_t {
  kInnovation = 1,
  kLevel = 2,       // auxiliary level events of the heavy-tailed U-field
  kFrozenPast = 3,  // derives per-past seeds from the base seed
  kProbe = 4,
  kMc = 5,
};

/// Documented seed derivation: pure function of (base, role, id).
inline std::uint64_t derive_seed(std::uint64_t base, StreamRole role, std::uint64_t id) {
  std::uint64_t h = splitmix64(base ^ (0x6a09e667f3bcc909ULL * static_cast<std::uint64_t>(role)));
  return splitmix64(h ^ id);
}

inline std::uint64_t cell_key(std::uint64_t stream, const IndexVec& cell) {
  std::uint64_t h = stream;
  for (Index c : cell) h = splitmix64(h ^ static_cast<std::uint64_t>(c));
  return h;
}

/// Uniform in [0,1) from a 64-bit key.
inline double unit_from_key(std::uint64_t key) {
  return static_cast<double>(key >> 11) * 0x1.0p-53;
}

inline double rademacher_from_key(std::uint64_t key) { return (key & 1u) ? 1.0 : -1.0; }

/// Standard normal via Box-Muller on two decorrelated keys.
inline double normal_from_key(std::uint64_t key) {
  const double u1 = unit_from_key(key | 1u);  // keep strictly positive
  const double u2 = unit_from_key(splitmix64(key ^ 0x5851f42d4c957f2dULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace qfield
