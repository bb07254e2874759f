#pragma once

#include <cstdint>

namespace dacl {

// Stateless counter-based random numbers. Every draw is a pure function of
// (seed, stream, slot, index), so kernels can evaluate draws in any order
// or in parallel and still reproduce the serial run bit for bit.

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t {
  Arrival = 1,
  TieBreak = 2,
  Split = 3,
};

class CounterRng {
 public:
  constexpr CounterRng() = default;
  constexpr explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  constexpr std::uint64_t seed() const { return seed_; }

  constexpr std::uint64_t bits(Stream stream, std::uint64_t slot, std::uint64_t index,
                               std::uint64_t sub = 0) const {
    std::uint64_t h = splitmix64(seed_ ^ splitmix64(static_cast<std::uint64_t>(stream)));
    h = splitmix64(h ^ slot);
    h = splitmix64(h ^ index);
    return splitmix64(h ^ sub);
  }

  /// Uniform double in [0, 1).
  constexpr double uniform(Stream stream, std::uint64_t slot, std::uint64_t index,
                           std::uint64_t sub = 0) const {
    return static_cast<double>(bits(stream, slot, index, sub) >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n), n < 2^32.
  constexpr std::uint32_t below(std::uint32_t n, Stream stream, std::uint64_t slot,
                                std::uint64_t index, std::uint64_t sub = 0) const {
    return static_cast<std::uint32_t>(((bits(stream, slot, index, sub) >> 32) * n) >> 32);
  }

 private:
  std::uint64_t seed_ = 0;
};

}  // namespace dacl
