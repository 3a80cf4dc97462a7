#pragma once

#include <cstdint>
#include <random>

namespace futon {

// splitmix64 finalizer; used to spread small integer seeds and derive
// independent streams from one base seed.
std::uint64_t mix_seed(std::uint64_t value);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Seeded generator whose outputs are identical on every platform: draws are
// built from raw mt19937_64 words, never from the implementation-defined
// std:: distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  std::uint64_t next() { return engine_(); }
  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  bool bernoulli(double p) { return uniform() < p; }
  // Box-Muller, one draw per call.
  double normal(double mean, double stddev);

 private:
  std::mt19937_64 engine_;
};

}  // namespace futon
