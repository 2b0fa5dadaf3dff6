#pragma once

// Seed derivation and the raw-bit transforms used by the simulator. The
// standard distributions are avoided on purpose: their output is
// implementation-defined, and replays must be byte-identical.

#include <cmath>
#include <cstdint>
#include <random>

namespace casep {

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream seed for (master, index, lane). Trajectory i of an ensemble uses
// derive_seed(master, i); lanes separate independent uses inside one
// trajectory (clock stream, initial-data streams).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                    std::uint64_t lane = 0) {
  return mix64(mix64(master ^ mix64(index)) + 0x632be59bd9b4e019ULL * (lane + 1));
}

class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Exp(rate).
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  // Uniform index in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  engine_type engine_;
};

}  // namespace casep
