#pragma once

#include <concepts>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace advxfer {

/// Seeded generator with distribution transforms written out by hand.
///
/// std::mt19937_64 produces the same bit stream on every conforming
/// implementation, but the std::*_distribution adaptors do not, so all
/// real/integer/normal draws go through the members below.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer on the closed range [lo, hi] (rejection sampling).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();

  void fill_normal(std::span<double> out) {
    for (double& v : out) v = normal();
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(std::span<const std::uint8_t> bytes,
                    std::uint64_t basis = 0xcbf29ce484222325ULL);

namespace detail {
inline std::uint64_t mix_label(std::uint64_t parent, std::string_view label) {
  return splitmix64(parent ^ fnv1a(label));
}
inline std::uint64_t mix_label(std::uint64_t parent, std::integral auto index) {
  return splitmix64(splitmix64(parent) + static_cast<std::uint64_t>(index) * 0x9e3779b97f4a7c15ULL);
}
}  // namespace detail

/// Child seed for a labelled path under `parent`, e.g.
/// derive_seed(master, "transfer", oracle_id, scenario_id, trial).
/// Distinct label paths give independent streams.
template <typename... Labels>
std::uint64_t derive_seed(std::uint64_t parent, const Labels&... labels) {
  std::uint64_t seed = splitmix64(parent);
  ((seed = detail::mix_label(seed, labels)), ...);
  return seed;
}

}  // namespace advxfer
