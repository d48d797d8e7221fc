#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace pchid {

// Deterministic, implementation-independent random streams. The standard
// distributions are not bit-stable across standard libraries, and the OU
// Monte Carlo needs billions of normal draws, so the generator and the
// distributions live here.
//
// Streams are derived from a root seed with derive(), so e.g. environment
// randomness is unaffected by how often the learner samples minibatches.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    // splitmix64 to spread the seed over the xoshiro256++ state
    std::uint64_t x = seed;
    for (auto& w : state_) w = splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  std::uint64_t uniform_int(std::uint64_t n) {
    // Lemire-style rejection-free for our purposes: n is tiny vs 2^64
    return next_u64() % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // standard normal, Box-Muller with caching
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925287 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Derive an independent stream seed from (root_seed, stream_id).
  static std::uint64_t derive(std::uint64_t root_seed, std::string_view stream) {
    std::uint64_t h = root_seed ^ 0x51afd1edul;
    for (char c : stream) {
      h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
      h *= 0x100000001b3ull;
    }
    std::uint64_t x = h;
    return splitmix64(x);
  }

  static std::uint64_t derive(std::uint64_t root_seed, std::uint64_t index) {
    std::uint64_t x = root_seed ^ (0x9e3779b97f4a7c15ull * (index + 1));
    return splitmix64(x);
  }

 private:
  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  std::uint64_t state_[4];
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace pchid
