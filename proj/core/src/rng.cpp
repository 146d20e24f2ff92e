#include "lidcd/rng.hpp"

#include <cmath>

namespace lidcd {

std::uint64_t mix_u64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t combine_keys(std::uint64_t a, std::uint64_t b) {
  return mix_u64(a ^ mix_u64(b + 0x165667b19e3779f9ULL));
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(combine_keys(mix_u64(seed), stream)) {}

RngStream RngStream::substream(std::uint64_t id) const {
  return RngStream(seed_, combine_keys(stream_, id));
}

std::uint64_t RngStream::next_u64() { return engine_(); }

double RngStream::uniform() {
  // 53 random mantissa bits -> [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RngStream::normal() {
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

double RngStream::normal(double mean, double stddev) {
  return mean + stddev * normal();
}

double RngStream::gumbel() { return -std::log(-std::log(uniform_open())); }

bool RngStream::bernoulli(double p) { return uniform() < p; }

std::uint64_t RngStream::below(std::uint64_t n) {
  // Rejection-free modulo is fine here: n is tiny relative to 2^64.
  return n == 0 ? 0 : next_u64() % n;
}

}  // namespace lidcd
