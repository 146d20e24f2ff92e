#pragma once

#include <cstdint>
#include <random>

namespace lidcd {

// Seeded random stream with explicit substream derivation.
//
// All variate transforms (uniform, normal, gumbel) are implemented here on
// top of the raw mt19937_64 output instead of std::*_distribution, so a
// given (seed, stream) pair produces the same draws on every standard
// library. Substreams derived from distinct ids are independent for all
// practical purposes (SplitMix64 mixing).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  // Fresh stream derived from this stream's identity (not its state).
  RngStream substream(std::uint64_t id) const;

  std::uint64_t next_u64();

  // Uniform on [0, 1).
  double uniform();
  // Uniform on the open interval (0, 1); safe under log().
  double uniform_open();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller (two uniforms per draw, no caching).
  double normal();
  double normal(double mean, double stddev);

  // Standard Gumbel(0, 1): -log(-log(U)).
  double gumbel();

  bool bernoulli(double p);

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used for seed mixing and key derivation.
std::uint64_t mix_u64(std::uint64_t x);
std::uint64_t combine_keys(std::uint64_t a, std::uint64_t b);

}  // namespace lidcd
