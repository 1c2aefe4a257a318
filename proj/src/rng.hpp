#pragma once

#include <cstdint>
#include <random>

namespace irsma {

// Substream identifiers for deriving independent generators from one seed.
enum class Stream : std::uint64_t {
  DirectLink = 1,
  IrsLink = 2,
  LosAngles = 3,
  UserPlacement = 4,
  PhaseInit = 5,
};

inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Stateless key derivation: same (seed, tags) always yields the same key.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a,
                                std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = mix64(seed + 0x9e3779b97f4a7c15ULL);
  h = mix64(h ^ (a + 0xff51afd7ed558ccdULL));
  h = mix64(h ^ (b + 0xc4ceb9fe1a85ec53ULL));
  h = mix64(h ^ (c + 0x2545f4914f6cdd1dULL));
  return h;
}

inline std::mt19937_64 make_stream(std::uint64_t seed, Stream tag,
                                   std::uint64_t b = 0, std::uint64_t c = 0) {
  return std::mt19937_64(stream_key(seed, static_cast<std::uint64_t>(tag), b, c));
}

}  // namespace irsma
