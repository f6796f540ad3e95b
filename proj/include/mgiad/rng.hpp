#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mgiad {

// All randomness flows from one seed through named substreams, so e.g. the
// shuffle order is independent of how many weights were initialized.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  static Rng stream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a over the stream name
    for (char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    return Rng(mix(seed ^ mix(h ^ mix(index))));
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    std::normal_distribution<double> d(mean, stddev);
    return d(gen_);
  }

  double uniform(double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(gen_);
  }

  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {  // inclusive bounds
    std::uniform_int_distribution<std::int64_t> d(lo, hi);
    return d(gen_);
  }

  std::mt19937_64& raw() { return gen_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {  // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::mt19937_64 gen_;
};

}  // namespace mgiad
