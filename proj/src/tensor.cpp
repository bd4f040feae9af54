#include "dtl/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dtl/error.hpp"

namespace dtl {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

Sample::Sample(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
  if (shape.empty()) throw std::invalid_argument("Sample: shape must have rank >= 1");
  for (auto d : shape)
    if (d == 0) throw std::invalid_argument("Sample: zero-sized dimension in " + shape_to_string(shape));
  if (shape_size(shape) != values.size())
    throw std::invalid_argument("Sample: shape " + shape_to_string(shape) + " does not match " +
                                std::to_string(values.size()) + " values");
}

Sample::Sample(Shape s, double fill) : Sample(s, std::vector<double>(shape_size(s), fill)) {}

Sample Sample::vector(std::vector<double> v) {
  Shape s{v.size()};
  return Sample(std::move(s), std::move(v));
}

bool Sample::all_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

void require_same_shape(const Sample& a, const Sample& b, const char* what) {
  if (a.shape != b.shape)
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_to_string(a.shape) +
                                " vs " + shape_to_string(b.shape));
}

void require_finite(const Sample& s, const char* what) {
  if (!s.all_finite()) throw NumericalError(std::string(what) + ": non-finite value");
}

Sample lincomb(double ca, const Sample& a, double cb, const Sample& b) {
  require_same_shape(a, b, "lincomb");
  Sample out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ca * a[i] + cb * b[i];
  return out;
}

Sample scaled(double c, const Sample& a) {
  Sample out = a;
  for (double& v : out.values) v *= c;
  return out;
}

void axpy(double c, const Sample& x, Sample& y) {
  require_same_shape(x, y, "axpy");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += c * x[i];
}

double dot(const Sample& a, const Sample& b) {
  if (a.size() != b.size()) require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Sample& a) { return std::sqrt(dot(a, a)); }

double squared_distance(const Sample& a, const Sample& b) {
  require_same_shape(a, b, "squared_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double mse(const Sample& a, const Sample& b) {
  return squared_distance(a, b) / static_cast<double>(a.size());
}

double cosine(const Sample& a, const Sample& b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine: zero vector");
  return dot(a, b) / (na * nb);
}

Sample mean_of(std::span<const Sample> samples) {
  if (samples.empty()) throw std::invalid_argument("mean_of: empty list");
  Sample acc(samples.front().shape, 0.0);
  for (const auto& s : samples) axpy(1.0, s, acc);
  return scaled(1.0 / static_cast<double>(samples.size()), acc);
}

Sample stack(std::span<const Sample> samples) {
  if (samples.empty()) throw std::invalid_argument("stack: empty list");
  Shape shape{samples.size()};
  shape.insert(shape.end(), samples.front().shape.begin(), samples.front().shape.end());
  std::vector<double> values;
  values.reserve(shape_size(shape));
  for (const auto& s : samples) {
    require_same_shape(samples.front(), s, "stack");
    values.insert(values.end(), s.values.begin(), s.values.end());
  }
  return Sample(std::move(shape), std::move(values));
}

std::vector<Sample> unstack(const Sample& batch) {
  Shape inner(batch.shape.begin() + 1, batch.shape.end());
  if (inner.empty()) inner = {1};
  const std::size_t n = batch.shape.front();
  const std::size_t m = shape_size(inner);
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.emplace_back(inner, std::vector<double>(batch.values.begin() + static_cast<std::ptrdiff_t>(i * m),
                                                batch.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * m)));
  return out;
}

namespace {

constexpr char kMagic[4] = {'D', 'T', 'L', '1'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const unsigned char> bytes, std::size_t pos, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= std::uint64_t{bytes[pos + static_cast<std::size_t>(i)]} << (8 * i);
  return v;
}

}  // namespace

std::vector<unsigned char> encode_dtl(const Sample& s) {
  std::vector<unsigned char> out(kMagic, kMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(s.shape.size()));
  for (auto d : s.shape) put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : s.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Sample decode_dtl(std::span<const unsigned char> bytes) {
  if (bytes.size() < 8 || !std::equal(kMagic, kMagic + 4, bytes.begin()))
    throw DataError("DTL1: bad magic");
  const auto rank = static_cast<std::size_t>(get_le(bytes, 4, 4));
  if (rank == 0 || bytes.size() < 8 + 4 * rank) throw DataError("DTL1: truncated header");
  Shape shape(rank);
  for (std::size_t i = 0; i < rank; ++i) shape[i] = static_cast<std::size_t>(get_le(bytes, 8 + 4 * i, 4));
  const std::size_t n = shape_size(shape);
  const std::size_t offset = 8 + 4 * rank;
  if (bytes.size() != offset + 8 * n)
    throw DataError("DTL1: payload size does not match shape " + shape_to_string(shape));
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = std::bit_cast<double>(get_le(bytes, offset + 8 * i, 8));
  try {
    return Sample(std::move(shape), std::move(values));
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("DTL1: ") + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_dtl(const std::filesystem::path& path, const Sample& s) {
  const auto bytes = encode_dtl(s);
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

Sample read_dtl(const std::filesystem::path& path) {
  const std::string raw = read_file(path);
  return decode_dtl(std::span(reinterpret_cast<const unsigned char*>(raw.data()), raw.size()));
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace dtl
