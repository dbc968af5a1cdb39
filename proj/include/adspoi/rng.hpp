#pragma once
// Deterministic stream derivation. Every randomized component (init, batch
// shuffling, negative slates, dropout masks, synthetic data) draws from an
// mt19937_64 seeded through splitmix so that streams are independent of
// thread scheduling and shuffle order.

#include <cstdint>
#include <random>

namespace adspoi {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97f4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(base) ^ a) ^ b);
}

inline std::mt19937_64 make_rng(std::uint64_t base, std::uint64_t a,
                                std::uint64_t b = 0) {
  return std::mt19937_64(stream_seed(base, a, b));
}

// Stream tags, kept distinct so substreams never collide.
inline constexpr std::uint64_t kStreamInit = 0x494E4954ULL;     // "INIT"
inline constexpr std::uint64_t kStreamShuffle = 0x53485546ULL;  // "SHUF"
inline constexpr std::uint64_t kStreamTraj = 0x5452414AULL;     // "TRAJ"
inline constexpr std::uint64_t kStreamSynth = 0x53594E54ULL;    // "SYNT"

}  // namespace adspoi
