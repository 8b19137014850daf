#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "dbf/matrix.hpp"

namespace dbf {

// Seedable 64-bit generator. All randomness in the library flows through
// this type. Independent streams are derived from the convention
// key = (experiment id, seed, purpose tag), so a seed cell produces the
// same numbers whether run alone or inside a parallel sweep.
//
// Gaussian and uniform variates are generated from the raw engine output
// here rather than through std:: distributions, whose sequences are not
// pinned by the standard; output is therefore identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::string_view experiment, std::uint64_t seed, std::string_view purpose);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller; the paired variate is cached).
  double normal();
  /// +1 or -1 with equal probability.
  double rademacher() { return (next_u64() >> 63) ? 1.0 : -1.0; }

  Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols);
  Vector rademacher_vector(Eigen::Index n);

 private:
  std::mt19937_64 engine_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace dbf
