#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace mrte {

// Deterministic random source. All draws are hand-rolled on top of the raw
// mt19937_64 output so that streams do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Derives an independent stream from (seed, stream) via splitmix64.
  static Rng child(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n), rejection sampled (n > 0).
  int uniform_int(int n);

  // Exponential with rate 1.
  double exponential() { return -std::log1p(-uniform01()); }

  std::string save_state() const;
  void load_state(const std::string& state);

 private:
  std::mt19937_64 gen_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace mrte
