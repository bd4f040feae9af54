#include "dtl/imageops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dtl/error.hpp"
#include "dtl/tensor.hpp"

namespace dtl {

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

// sRGB primaries, D65 white (IEC 61966-2-1 / Lindbloom).
constexpr Mat3 kRgbToXyz{{{0.4124564, 0.3575761, 0.1804375},
                          {0.2126729, 0.7151522, 0.0721750},
                          {0.0193339, 0.1191920, 0.9503041}}};
constexpr std::array<double, 3> kWhite{0.95047, 1.00000, 1.08883};

constexpr double kDelta = 6.0 / 29.0;
constexpr double kLinearCut = 0.04045;
constexpr double kLinearCutOut = kLinearCut / 12.92;

Mat3 invert(const Mat3& m) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  Mat3 r{};
  r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return r;
}

const Mat3& xyz_to_rgb() {
  static const Mat3 inv = invert(kRgbToXyz);
  return inv;
}

std::array<double, 3> mat_mul(const Mat3& m, const std::array<double, 3>& v) {
  return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2], m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
          m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

double to_linear(double c) { return c <= kLinearCut ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); }
double to_gamma(double l) { return l <= kLinearCutOut ? 12.92 * l : 1.055 * std::pow(l, 1.0 / 2.4) - 0.055; }

double lab_f(double t) {
  return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}
double lab_f_inv(double f) { return f > kDelta ? f * f * f : 3.0 * kDelta * kDelta * (f - 4.0 / 29.0); }

bool is_foreground(const GrayImage* mask, std::size_t i) { return mask == nullptr || mask->pixels[i] >= 0.5; }

void require_binary(const GrayImage& mask) {
  for (double v : mask.pixels)
    if (v != 0.0 && v != 1.0) throw DataError("mask must be binary (0 or 255)");
}

}  // namespace

RgbImage hflip(const RgbImage& img) {
  RgbImage out(img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

RgbImage center_crop_resize(const RgbImage& img, std::size_t crop, std::size_t out) {
  if (crop == 0 || out == 0) throw std::invalid_argument("center_crop_resize: sizes must be positive");
  if (img.height < crop || img.width < crop)
    throw DataError("center_crop_resize: image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                    " is smaller than the " + std::to_string(crop) + "x" + std::to_string(crop) + " crop");
  const std::size_t oy = (img.height - crop) / 2, ox = (img.width - crop) / 2;
  auto src = [&](std::size_t y, std::size_t x, std::size_t c) { return img.at(oy + y, ox + x, c); };
  RgbImage res(out, out);
  if (crop == 2 * out) {
    for (std::size_t y = 0; y < out; ++y)
      for (std::size_t x = 0; x < out; ++x)
        for (std::size_t c = 0; c < 3; ++c)
          res.at(y, x, c) = 0.25 * (src(2 * y, 2 * x, c) + src(2 * y, 2 * x + 1, c) + src(2 * y + 1, 2 * x, c) +
                                    src(2 * y + 1, 2 * x + 1, c));
    return res;
  }
  const double scale = static_cast<double>(crop) / static_cast<double>(out);
  auto coord = [&](std::size_t o, std::size_t& i0, std::size_t& i1, double& w) {
    const double s = std::clamp((static_cast<double>(o) + 0.5) * scale - 0.5, 0.0, static_cast<double>(crop - 1));
    i0 = static_cast<std::size_t>(std::floor(s));
    i1 = std::min(i0 + 1, crop - 1);
    w = s - static_cast<double>(i0);
  };
  for (std::size_t y = 0; y < out; ++y) {
    std::size_t y0, y1;
    double wy;
    coord(y, y0, y1, wy);
    for (std::size_t x = 0; x < out; ++x) {
      std::size_t x0, x1;
      double wx;
      coord(x, x0, x1, wx);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = (1 - wx) * src(y0, x0, c) + wx * src(y0, x1, c);
        const double bot = (1 - wx) * src(y1, x0, c) + wx * src(y1, x1, c);
        res.at(y, x, c) = (1 - wy) * top + wy * bot;
      }
    }
  }
  return res;
}

RgbImage apply_mask(const RgbImage& img, const GrayImage& mask, double background_value) {
  if (mask.height != img.height || mask.width != img.width)
    throw DataError("apply_mask: mask is " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                    ", image is " + std::to_string(img.width) + "x" + std::to_string(img.height));
  require_binary(mask);
  RgbImage out = img;
  for (std::size_t i = 0; i < mask.pixels.size(); ++i)
    if (mask.pixels[i] == 0.0)
      for (std::size_t c = 0; c < 3; ++c) out.pixels[i * 3 + c] = background_value;
  return out;
}

std::array<double, 3> srgb_to_lab(std::array<double, 3> rgb) {
  for (double& c : rgb) c = to_linear(c);
  const auto xyz = mat_mul(kRgbToXyz, rgb);
  const double fx = lab_f(xyz[0] / kWhite[0]), fy = lab_f(xyz[1] / kWhite[1]), fz = lab_f(xyz[2] / kWhite[2]);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

std::array<double, 3> lab_to_srgb_unclipped(std::array<double, 3> lab) {
  const double fy = (lab[0] + 16.0) / 116.0;
  const double fx = fy + lab[1] / 500.0;
  const double fz = fy - lab[2] / 200.0;
  const std::array<double, 3> xyz{kWhite[0] * lab_f_inv(fx), kWhite[1] * lab_f_inv(fy), kWhite[2] * lab_f_inv(fz)};
  auto rgb = mat_mul(xyz_to_rgb(), xyz);
  for (double& c : rgb) c = to_gamma(c);
  return rgb;
}

LabImage rgb_to_lab(const RgbImage& img) {
  LabImage out{img.height, img.width, std::vector<double>(img.pixels.size())};
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
    const auto lab = srgb_to_lab({img.pixels[i], img.pixels[i + 1], img.pixels[i + 2]});
    std::copy(lab.begin(), lab.end(), out.pixels.begin() + static_cast<std::ptrdiff_t>(i));
  }
  return out;
}

LabToRgbResult lab_to_rgb(const LabImage& img) {
  LabToRgbResult res;
  res.image = RgbImage(img.height, img.width);
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
    const auto rgb = lab_to_srgb_unclipped({img.pixels[i], img.pixels[i + 1], img.pixels[i + 2]});
    for (std::size_t c = 0; c < 3; ++c) {
      double v = rgb[c];
      // NaN from negative linear values under the 1/2.4 power also counts as clipped.
      if (!(v >= 0.0)) {
        v = 0.0;
        ++res.clipped;
      } else if (v > 1.0) {
        v = 1.0;
        ++res.clipped;
      }
      res.image.pixels[i + c] = v;
    }
  }
  return res;
}

ChannelStats lab_channel_stats(const LabImage& img, const GrayImage* mask) {
  ChannelStats s;
  const std::size_t n_px = img.pixels.size() / 3;
  std::size_t n = 0;
  for (std::size_t i = 0; i < n_px; ++i) {
    if (!is_foreground(mask, i)) continue;
    ++n;
    for (std::size_t c = 0; c < 3; ++c) s.mean[c] += img.pixels[i * 3 + c];
  }
  if (n == 0) throw DataError("color statistics: no foreground pixels");
  for (double& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n_px; ++i) {
    if (!is_foreground(mask, i)) continue;
    for (std::size_t c = 0; c < 3; ++c) {
      const double d = img.pixels[i * 3 + c] - s.mean[c];
      s.stddev[c] += d * d;
    }
  }
  for (double& v : s.stddev) v = std::sqrt(v / static_cast<double>(n));
  return s;
}

ColorCorrection color_correct(const RgbImage& target, const RgbImage& source, const std::optional<GrayImage>& mask) {
  const GrayImage* m = nullptr;
  if (mask) {
    if (mask->height != target.height || mask->width != target.width || mask->height != source.height ||
        mask->width != source.width)
      throw DataError("color_correct: mask dimensions must match both images");
    require_binary(*mask);
    m = &*mask;
  }
  ColorCorrection out;
  out.lab = rgb_to_lab(target);
  const auto ts = lab_channel_stats(out.lab, m);
  const auto ss = lab_channel_stats(rgb_to_lab(source), m);
  for (std::size_t i = 0; i < out.lab.pixels.size(); i += 3)
    for (std::size_t c = 0; c < 3; ++c) {
      double& v = out.lab.pixels[i + c];
      const double centered = v - ts.mean[c];
      v = (ts.stddev[c] < 1e-8 ? centered : centered / ts.stddev[c] * ss.stddev[c]) + ss.mean[c];
    }
  auto rgb = lab_to_rgb(out.lab);
  out.image = std::move(rgb.image);
  out.clipped = rgb.clipped;
  return out;
}

namespace {

struct Netpbm {
  std::size_t width, height;
  std::string data;
};

Netpbm parse_netpbm(const std::string& raw, const std::string& magic, std::size_t channels, const std::string& name) {
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < raw.size()) {
      if (raw[pos] == '#') {
        while (pos < raw.size() && raw[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(raw[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < raw.size() && !std::isspace(static_cast<unsigned char>(raw[pos]))) ++pos;
    return raw.substr(start, pos - start);
  };
  if (next_token() != magic) throw DataError(name + ": expected " + magic + " header");
  Netpbm img{};
  try {
    img.width = std::stoul(next_token());
    img.height = std::stoul(next_token());
    if (std::stoul(next_token()) != 255) throw DataError(name + ": only 8-bit (maxval 255) files are supported");
  } catch (const std::logic_error&) {
    throw DataError(name + ": malformed header");
  }
  ++pos;  // single whitespace before the raster
  const std::size_t need = img.width * img.height * channels;
  if (raw.size() < pos + need) throw DataError(name + ": truncated raster");
  img.data = raw.substr(pos, need);
  return img;
}

unsigned char quantize(double v) {
  return static_cast<unsigned char>(std::clamp(std::floor(v * 255.0 + 0.5), 0.0, 255.0));
}

}  // namespace

RgbImage read_ppm(const std::filesystem::path& path) {
  const auto p = parse_netpbm(read_file(path), "P6", 3, path.string());
  RgbImage img(p.height, p.width);
  for (std::size_t i = 0; i < p.data.size(); ++i) img.pixels[i] = static_cast<unsigned char>(p.data[i]) / 255.0;
  return img;
}

std::string encode_ppm(const RgbImage& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  for (double v : img.pixels) out.push_back(static_cast<char>(quantize(v)));
  return out;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) { write_file_atomic(path, encode_ppm(img)); }

GrayImage read_pgm(const std::filesystem::path& path) {
  const auto p = parse_netpbm(read_file(path), "P5", 1, path.string());
  GrayImage img{p.height, p.width, std::vector<double>(p.data.size())};
  for (std::size_t i = 0; i < p.data.size(); ++i) img.pixels[i] = static_cast<unsigned char>(p.data[i]) / 255.0;
  return img;
}

std::string encode_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  for (double v : img.pixels) out.push_back(static_cast<char>(quantize(v)));
  return out;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) { write_file_atomic(path, encode_pgm(img)); }

}  // namespace dtl
