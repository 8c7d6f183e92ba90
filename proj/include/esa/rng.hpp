#pragma once

// Platform-stable random numbers. std::mt19937_64 has a fully specified output
// sequence; the distributions below are written out explicitly because the
// standard library's are implementation-defined.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace esa {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for (seed, tags...): tags are folded in with splitmix64.
  static Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

  // Uniform on [0,1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal by the Box-Muller transform (both variates are used).
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace esa
