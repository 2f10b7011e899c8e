#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace geossl {

// 64-bit FNV-1a. Used for seed derivation and config digests so that the
// same inputs hash identically on every platform.
constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = kFnvOffset) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string to_hex(std::uint64_t value);

/// Derives a sub-seed from a master seed and a list of labels, e.g.
/// derive_seed(master, {"split", dataset_id, class_name}). The mixing is
/// FNV-1a over the decimal master seed plus the '|'-joined labels.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::string_view> labels);
std::uint64_t derive_seed(std::uint64_t master, const std::vector<std::string>& labels);

/// Deterministic random stream. The engine is the standard-specified
/// mersenne_twister_engine (mt19937_64); all derived draws (bounded ints,
/// uniforms, gaussians, shuffles) are implemented here explicitly so the
/// stream is identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Lemire's multiply-shift rejection method.
  std::uint64_t below(std::uint64_t n);

  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi_inclusive) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller (second value cached).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Fisher-Yates, iterating from the back.
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace geossl
