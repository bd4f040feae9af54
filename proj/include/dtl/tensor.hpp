#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dtl {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// A flat row-major array of doubles with an explicit shape. Used for data
/// points, noised points, noise draws and latents alike.
struct Sample {
  Shape shape;
  std::vector<double> values;

  Sample() = default;
  Sample(Shape s, std::vector<double> v);
  explicit Sample(Shape s, double fill = 0.0);

  static Sample vector(std::vector<double> v);
  static Sample scalar(double v) { return vector({v}); }

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::span<const double> view() const { return values; }
  std::span<double> view() { return values; }

  bool all_finite() const;
  bool operator==(const Sample&) const = default;
};

void require_same_shape(const Sample& a, const Sample& b, const char* what);
void require_finite(const Sample& s, const char* what);

// Elementwise helpers. All of them check shapes.
Sample lincomb(double ca, const Sample& a, double cb, const Sample& b);
Sample scaled(double c, const Sample& a);
void axpy(double c, const Sample& x, Sample& y);
double dot(const Sample& a, const Sample& b);
double norm(const Sample& a);
double squared_distance(const Sample& a, const Sample& b);
double mse(const Sample& a, const Sample& b);
double cosine(const Sample& a, const Sample& b);

/// Mean of a nonempty list of equally shaped samples.
Sample mean_of(std::span<const Sample> samples);

/// Stack equally shaped samples into one tensor with a leading batch axis.
Sample stack(std::span<const Sample> samples);
/// Inverse of stack: split along the leading axis.
std::vector<Sample> unstack(const Sample& batch);

// DTL1 container: "DTL1", u32 LE rank, u32 LE dims, f64 LE values.
std::vector<unsigned char> encode_dtl(const Sample& s);
Sample decode_dtl(std::span<const unsigned char> bytes);
void write_dtl(const std::filesystem::path& path, const Sample& s);
Sample read_dtl(const std::filesystem::path& path);

/// Write bytes to `path` through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// Decimal text with 17 significant digits; parses back to the same double.
std::string format_double(double v);

}  // namespace dtl
