#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mpsych {

// Seeded random stream. Wraps mt19937_64 (fully specified by the standard)
// and draws uniforms/normals with our own transforms so that streams are
// bit-identical across standard library implementations.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  // Standard normal via the Box-Muller transform (no cached second draw, so
  // the stream position depends only on the number of calls).
  double normal();

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // For std::shuffle and friends.
  using result_type = std::uint64_t;
  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// Stable 64-bit string hash (FNV-1a). Used for unit ids; never changes
// between releases because run directories depend on it.
std::uint64_t stable_hash(std::string_view text);

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// unit_seed = hash(master_seed, experiment, unit_id).
std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view experiment,
                          std::string_view unit_id);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

// Fisher-Yates shuffle driven by RandomSource::uniform_index, so the result
// does not depend on the std::shuffle implementation.
template <typename It>
void stable_shuffle(It first, It last, RandomSource& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = rng.uniform_index(i);
    std::iter_swap(first + static_cast<std::ptrdiff_t>(i - 1),
                   first + static_cast<std::ptrdiff_t>(j));
  }
}

}  // namespace mpsych
