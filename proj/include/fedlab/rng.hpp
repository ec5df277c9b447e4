// Seedable, platform-independent PRNG.
//
// xoshiro256++ with splitmix64 state expansion. Normal draws use Box-Muller
// (the polar-free, two-uniform form) so that every stream is bit-reproducible
// across standard libraries and platforms; std::normal_distribution is not.
#pragma once

#include <cstdint>

namespace fedlab {

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on [0, 1), 53-bit mantissa.
  double uniform();

  // Uniform integer on [lo, hi] inclusive, by rejection (unbiased).
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);

  // N(mean, sd^2). Draws are generated in pairs and cached.
  double normal(double mean = 0.0, double sd = 1.0);

  // Derive an independent child stream (used to give each client its own
  // stream regardless of how many draws earlier clients consumed).
  Rng child(std::uint64_t stream_id) const;

 private:
  std::uint64_t s_[4];
  double cached_ = 0.0;
  bool has_cached_ = false;
  std::uint64_t seed_;
};

}  // namespace fedlab
