#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace wgsim {

/// Engine used for every seeded draw (strategy tables, price moves, initial
/// histories). Reproducibility is guaranteed per build.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used only to derive independent seeds and the
/// counter-based tie-break draws, never as a general-purpose generator.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed derivation: derive_seed(parent, a, b, ...) folds each tag into the
// parent through splitmix64. Distinct tag paths give unrelated seeds, so a
// task's stream depends only on its coordinates, not on evaluation order.
constexpr std::uint64_t derive_seed(std::uint64_t parent) noexcept { return parent; }

template <typename... Tags>
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag, Tags... rest) noexcept {
  return derive_seed(splitmix64(parent ^ splitmix64(tag + 0x632be59bd9b4e019ULL)),
                     static_cast<std::uint64_t>(rest)...);
}

/// Tags separating the sub-streams of one master seed.
enum class Stream : std::uint64_t {
  kPrice = 1,
  kAgents = 2,
  kHistory = 3,
  kTieBreak = 4,
  kPriceHistory = 5,
};

constexpr std::uint64_t tag(Stream s) noexcept { return static_cast<std::uint64_t>(s); }

/// Uniform index in [0, n) from a (key, counter) pair. Stateless, so an
/// agent's tie-breaks do not depend on how often it tied before.
inline std::size_t counter_draw(std::uint64_t key, std::uint64_t counter, std::size_t n) noexcept {
  const std::uint64_t h = splitmix64(key ^ splitmix64(counter));
  return static_cast<std::size_t>((static_cast<unsigned __int128>(h) * n) >> 64);
}

}  // namespace wgsim
