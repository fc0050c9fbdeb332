#pragma once

#include <cstdint>

namespace photon_census {

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Mixes a seed with up to two indices into a well-separated 64-bit key.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t h = splitmix64_mix(seed + 0x9e3779b97f4a7c15ULL);
  h = splitmix64_mix(h ^ (a + 0x632be59bd9b4e019ULL));
  h = splitmix64_mix(h ^ (b + 0xd1b54a32d192ed03ULL));
  return h;
}

// SplitMix64 stream keyed by (seed, stream tag, counter). Every experiment
// gets its own stream, so results do not depend on generation order.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t tag, std::uint64_t index)
      : state_(derive_seed(seed, tag, index)) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix64_mix(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

}  // namespace photon_census
