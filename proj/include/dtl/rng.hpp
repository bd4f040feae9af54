#pragma once

#include <cstdint>
#include <random>

#include "dtl/tensor.hpp"

namespace dtl {

/// Seeded source of uniform and standard normal variates.
///
/// Built on std::mt19937_64, whose output sequence is fixed by the standard,
/// with in-house uniform and Box-Muller transforms (the std distributions are
/// implementation defined). `draws()` counts every variate handed out.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return draws_; }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal();
  Sample normal_like(const Shape& shape);

  /// Independent stream for a sub-task, derived deterministically from this
  /// stream's seed and `index` (splitmix64 mixing).
  RngStream fork(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::uint64_t draws_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace dtl
