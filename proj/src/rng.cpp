#include "gradband/rng.hpp"

namespace gradband {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(const StreamKey& key) {
  std::uint64_t h = splitmix64(key.master_seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(key.lane));
  h = splitmix64(h ^ key.iteration);
  h = splitmix64(h ^ key.index);
  return h;
}

Engine make_stream(const StreamKey& key) {
  const std::uint64_t s = stream_seed(key);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(key.index), static_cast<std::uint32_t>(key.iteration)};
  return Engine(seq);
}

}  // namespace gradband
