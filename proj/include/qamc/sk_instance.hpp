#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace qamc {

inline constexpr unsigned kMinSpins = 2;
// Dense 2^n x 2^n transition matrices are ~2 GB at n = 14.
inline constexpr unsigned kMaxSpins = 14;

// Basis-state index of a configuration of n Ising spins.
// Bit i set means spin i is down (-1); bit i clear means up (+1).
// Spin 1 in 1-based notation is the least-significant bit.
struct SpinConfig {
  std::uint32_t index = 0;

  // Spin value (+1 / -1) at 0-based site i.
  int spin(unsigned i) const { return (index >> i) & 1U ? -1 : 1; }

  SpinConfig flipped(unsigned i) const { return SpinConfig{index ^ (std::uint32_t{1} << i)}; }

  friend bool operator==(SpinConfig, SpinConfig) = default;
};

std::vector<int> to_spins(SpinConfig cfg, unsigned n);
SpinConfig from_spins(std::span<const int> spins);

// Number of differing spins.
inline unsigned hamming_distance(SpinConfig a, SpinConfig b) {
  return static_cast<unsigned>(std::popcount(a.index ^ b.index));
}

inline std::size_t state_count(unsigned n) { return std::size_t{1} << n; }

// Sherrington-Kirkpatrick instance
//   E(s) = sum_{i<j} J_ij s_i s_j + sum_i h_i s_i
// with all couplings stored as the row-major upper triangle
// (0,1), (0,2), ..., (0,n-1), (1,2), ...
class SKInstance {
 public:
  SKInstance(unsigned n, std::vector<double> couplings, std::vector<double> fields, std::uint64_t seed);

  unsigned n() const { return n_; }
  std::uint64_t seed() const { return seed_; }
  const std::string& instance_id() const { return id_; }
  std::span<const double> couplings() const { return couplings_; }
  std::span<const double> fields() const { return fields_; }

  // 0-based sites, i != j.
  double coupling(unsigned i, unsigned j) const;
  double field(unsigned i) const { return fields_[i]; }

  friend bool operator==(const SKInstance&, const SKInstance&) = default;

 private:
  unsigned n_;
  std::vector<double> couplings_;
  std::vector<double> fields_;
  std::uint64_t seed_;
  std::string id_;
};

std::size_t coupling_count(unsigned n);
std::size_t coupling_offset(unsigned n, unsigned i, unsigned j);

std::string make_instance_id(unsigned n, std::uint64_t seed);

// i.i.d. standard-normal couplings and fields from a stream keyed by (seed, n).
SKInstance generate_instance(unsigned n, std::uint64_t seed);

double energy(const SKInstance& inst, SpinConfig cfg);

// energy() for every basis state, in index order.
std::vector<double> all_energies(const SKInstance& inst);

// Text format:
//   n=<int>
//   seed=<u64>
//   couplings:
//   i j J_ij        (1-based, i < j)
//   fields:
//   i h_i           (1-based)
// Blank lines and lines starting with '#' are ignored. Values are written
// in shortest round-trip decimal, so save/load is bit-exact.
void save_instance(const SKInstance& inst, const std::filesystem::path& path);
SKInstance load_instance(const std::filesystem::path& path);

std::string format_instance(const SKInstance& inst);
SKInstance parse_instance(const std::string& text);

}  // namespace qamc
