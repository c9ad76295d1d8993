#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace ventrl {

// Counter-based generator: each draw hashes (key, counter), so streams can be
// split per module/run without sharing state. One seed drives a whole run;
// split() derives independent streams by tag.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x9e3779b97f4a7c15ull)) {}

  Rng split(std::string_view tag) const {
    std::uint64_t h = key_;
    for (char c : tag) h = mix(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
    return Rng(FromKey{}, mix(h));
  }

  Rng split(std::uint64_t salt) const { return Rng(FromKey{}, mix(key_ ^ mix(salt + 0x1ull))); }

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0xbf58476d1ce4e5b9ull); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  float uniformf() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

  double uniform_in(double lo, double hi) { return lo + uniform() * (hi - lo); }

  // Box-Muller from two uniforms; no state carried across calls.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // [0, n)
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  struct FromKey {};
  Rng(FromKey, std::uint64_t key) : key_(key) {}

  static std::uint64_t mix(std::uint64_t x) {
    // SplitMix64 finalizer
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace ventrl
