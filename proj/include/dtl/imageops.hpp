#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dtl {

/// Interleaved RGB image, channels in [0, 1].
struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;  // (y * width + x) * 3 + c

  RgbImage() = default;
  RgbImage(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), pixels(h * w * 3, fill) {}

  double& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * 3 + c]; }
  bool operator==(const RgbImage&) const = default;
};

/// Interleaved CIE Lab (D65): L in [0, 100], a and b unbounded.
struct LabImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;
};

struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;  // [0, 1]
};

RgbImage hflip(const RgbImage& img);

/// Central crop of crop x crop (floor offsets), then resize to out x out:
/// 2x2 box average when crop == 2 * out, bilinear (half-pixel centers) otherwise.
RgbImage center_crop_resize(const RgbImage& img, std::size_t crop = 128, std::size_t out = 64);

/// Keeps pixels where mask == 1 and sets the rest to `background_value`.
/// The mask must be binary (0 or 1 after normalization).
RgbImage apply_mask(const RgbImage& img, const GrayImage& mask, double background_value);

/// sRGB (D65) -> XYZ -> CIE Lab.
std::array<double, 3> srgb_to_lab(std::array<double, 3> rgb);
/// Inverse of srgb_to_lab without clipping.
std::array<double, 3> lab_to_srgb_unclipped(std::array<double, 3> lab);

LabImage rgb_to_lab(const RgbImage& img);

struct LabToRgbResult {
  RgbImage image;
  std::size_t clipped = 0;  // channel values pulled back into [0, 1]
};

LabToRgbResult lab_to_rgb(const LabImage& img);

struct ColorCorrection {
  LabImage lab;  // corrected target before conversion and clipping
  RgbImage image;
  std::size_t clipped = 0;
};

/// Matches each Lab channel's mean and population std of `target` to those of
/// `source`. Channels with std < 1e-8 are only shifted. When `mask` is given,
/// statistics are taken over foreground pixels of both images.
ColorCorrection color_correct(const RgbImage& target, const RgbImage& source,
                              const std::optional<GrayImage>& mask = std::nullopt);

struct ChannelStats {
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{};
};

ChannelStats lab_channel_stats(const LabImage& img, const GrayImage* mask = nullptr);

// Binary PPM (P6) / PGM (P5), 8-bit. Writing quantizes with round-half-up.
RgbImage read_ppm(const std::filesystem::path& path);
std::string encode_ppm(const RgbImage& img);
void write_ppm(const std::filesystem::path& path, const RgbImage& img);
GrayImage read_pgm(const std::filesystem::path& path);
std::string encode_pgm(const GrayImage& img);
void write_pgm(const std::filesystem::path& path, const GrayImage& img);

}  // namespace dtl
