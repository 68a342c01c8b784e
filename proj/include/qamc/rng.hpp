#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace qamc {

// SplitMix64 finalizer. Used to derive independent child seeds from a master
// seed and a path of integer keys, so every instance / chain gets its own
// stream regardless of the order in which work is scheduled.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(master);
  for (auto key : path) s = mix64(s ^ mix64(key + 0x632be59bd9b4e019ULL));
  return s;
}

// A deterministic random stream. Owned by exactly one consumer at a time.
class Stream {
 public:
  using engine_type = std::mt19937_64;

  explicit Stream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  static Stream derive(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    return Stream(derive_seed(master, path));
  }

  std::uint64_t seed() const { return seed_; }

  // Uniform on [0, 1).
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  // Uniform integer on [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    return std::uniform_int_distribution<std::uint64_t>(0, bound - 1)(engine_);
  }

  double normal() { return normal_(engine_); }

  engine_type& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  engine_type engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace qamc
