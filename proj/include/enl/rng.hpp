#pragma once

#include <cstdint>
#include <random>

namespace enl {

// splitmix64 step, used to derive well-separated seeds for independent
// streams from a single master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed for stream `stream_id` of a run with master seed `seed`.  Streams are
// assigned per (experiment, replica) so replicas can run in parallel and
// re-runs are reproducible.
inline std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t stream_id) {
  std::uint64_t s = seed ^ (0x510e527fade682d1ULL * (stream_id + 1));
  splitmix64(s);
  return splitmix64(s);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream_id = 0) {
  return std::mt19937_64(derive_stream_seed(seed, stream_id));
}

}  // namespace enl
