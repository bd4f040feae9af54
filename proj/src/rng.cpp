#include "dtl/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dtl {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double RngStream::uniform() {
  ++draws_;
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  ++draws_;
  if (span == 0) return static_cast<std::int64_t>(engine_());
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return lo + static_cast<std::int64_t>(r % span);
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    ++draws_;
    return spare_;
  }
  double u1;
  do {
    u1 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  } while (u1 == 0.0);
  const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  ++draws_;
  return r * std::cos(theta);
}

Sample RngStream::normal_like(const Shape& shape) {
  Sample s(shape, 0.0);
  for (double& v : s.values) v = normal();
  return s;
}

RngStream RngStream::fork(std::uint64_t index) const {
  return RngStream(splitmix64(seed_ ^ splitmix64(index + 1)));
}

}  // namespace dtl
