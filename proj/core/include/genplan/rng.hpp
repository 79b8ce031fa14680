#pragma once

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

namespace genplan {

// All randomness flows through this engine; Boost distributions keep draws
// identical across standard library implementations.
using Rng = std::mt19937_64;

inline double standard_normal(Rng& rng) {
  return boost::random::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return boost::random::uniform_real_distribution<double>(lo, hi)(rng);
}

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream seeds derived from a trial seed.
enum class Stream : std::uint64_t { kWorld = 1, kPlanner = 2, kMppi = 3, kData = 4, kTrain = 5 };

inline Rng make_rng(std::uint64_t seed, Stream stream) {
  return Rng(mix64(mix64(seed) ^ static_cast<std::uint64_t>(stream)));
}

}  // namespace genplan
