#pragma once

#include <cstdint>
#include <random>

namespace gradband {

/// Purpose lanes keep training, evaluation, pilot and baseline draws disjoint.
enum class Lane : std::uint64_t {
  instance = 1,
  rewards = 2,
  policy = 3,
  self_baseline = 4,
  pilot = 5,
  evaluation = 6,
  mom = 7,
  test = 8,
};

/// Stream key (master_seed, lane, iteration, index). Streams with distinct
/// keys are statistically independent and do not depend on creation order.
struct StreamKey {
  std::uint64_t master_seed = 0;
  Lane lane = Lane::test;
  std::uint64_t iteration = 0;
  std::uint64_t index = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Hash of a stream key; feeds the engine seed.
std::uint64_t stream_seed(const StreamKey& key);

using Engine = std::mt19937_64;

Engine make_stream(const StreamKey& key);

inline Engine make_stream(std::uint64_t master_seed, Lane lane, std::uint64_t iteration,
                          std::uint64_t index) {
  return make_stream(StreamKey{master_seed, lane, iteration, index});
}

/// Uniform double in [0, 1).
inline double uniform01(Engine& rng) { return std::generate_canonical<double, 64>(rng); }

}  // namespace gradband
