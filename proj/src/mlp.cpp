#include "dtl/mlp.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "dtl/error.hpp"
#include "dtl/tensor.hpp"

namespace dtl {

std::size_t MlpArch::parameter_count() const {
  return hidden * in_width() + hidden + hidden * hidden + hidden + output_dim * hidden + output_dim;
}

void MlpArch::validate() const {
  if (input_dim == 0 || output_dim == 0 || hidden == 0) throw ConfigError("mlp: dimensions must be positive");
  if (time_features % 2 != 0) throw ConfigError("mlp: time_features must be even");
}

std::vector<MlpParams::TensorRef> MlpParams::layout() const {
  const std::size_t h = arch.hidden, in = arch.in_width(), out = arch.output_dim;
  std::vector<TensorRef> refs;
  std::size_t off = 0;
  auto add = [&](std::string name, Shape shape) {
    const std::size_t n = shape_size(shape);
    refs.push_back({std::move(name), off, std::move(shape)});
    off += n;
  };
  add("W1", {h, in});
  add("b1", {h});
  add("W2", {h, h});
  add("b2", {h});
  add("W3", {out, h});
  add("b3", {out});
  return refs;
}

MlpParams mlp_zero(const MlpArch& arch) {
  arch.validate();
  return MlpParams{arch, std::vector<double>(arch.parameter_count(), 0.0)};
}

MlpParams mlp_init(const MlpArch& arch, RngStream& rng) {
  MlpParams p = mlp_zero(arch);
  for (const auto& ref : p.layout()) {
    if (ref.shape.size() != 2) continue;
    const double sd = 1.0 / std::sqrt(static_cast<double>(ref.shape[1]));
    for (std::size_t i = 0; i < shape_size(ref.shape); ++i) p.theta[ref.offset + i] = sd * rng.normal();
  }
  return p;
}

std::vector<double> sinusoidal_features(double alpha_bar, std::size_t k) {
  std::vector<double> out(k);
  const std::size_t half = k / 2;
  for (std::size_t j = 0; j < half; ++j) {
    const double freq = half == 1 ? 1.0 : std::pow(1e4, static_cast<double>(j) / static_cast<double>(half - 1));
    out[2 * j] = std::sin(freq * alpha_bar);
    out[2 * j + 1] = std::cos(freq * alpha_bar);
  }
  return out;
}

namespace {

// Offsets of W1, b1, W2, b2, W3, b3 inside theta.
std::array<std::size_t, 6> offsets(const MlpArch& A) {
  const std::size_t h = A.hidden;
  std::array<std::size_t, 6> o{};
  o[1] = o[0] + h * A.in_width();
  o[2] = o[1] + h;
  o[3] = o[2] + h * h;
  o[4] = o[3] + h;
  o[5] = o[4] + A.output_dim * h;
  return o;
}

inline double silu(double z) { return z / (1.0 + std::exp(-z)); }

inline double silu_grad(double z) {
  const double s = 1.0 / (1.0 + std::exp(-z));
  return s * (1.0 + z * (1.0 - s));
}

// y = W x + b for row-major W (rows x cols).
void affine(const double* W, const double* b, const double* x, std::size_t rows, std::size_t cols, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* w = W + r * cols;
    double acc = b[r];
    for (std::size_t c = 0; c < cols; ++c) acc += w[c] * x[c];
    y[r] = acc;
  }
}

struct Activations {
  std::vector<double> z1, a1, z2, a2, out;
};

void forward_cached(const MlpParams& p, std::span<const double> input, Activations& act) {
  const auto& A = p.arch;
  if (input.size() != A.in_width())
    throw std::invalid_argument("mlp: input width " + std::to_string(input.size()) + " != " +
                                std::to_string(A.in_width()));
  const auto o = offsets(A);
  const double* th = p.theta.data();
  const std::size_t h = A.hidden;
  act.z1.resize(h);
  act.a1.resize(h);
  act.z2.resize(h);
  act.a2.resize(h);
  act.out.resize(A.output_dim);
  affine(th + o[0], th + o[1], input.data(), h, A.in_width(), act.z1.data());
  for (std::size_t i = 0; i < h; ++i) act.a1[i] = silu(act.z1[i]);
  affine(th + o[2], th + o[3], act.a1.data(), h, h, act.z2.data());
  for (std::size_t i = 0; i < h; ++i) act.a2[i] = silu(act.z2[i]);
  affine(th + o[4], th + o[5], act.a2.data(), A.output_dim, h, act.out.data());
}

}  // namespace

std::vector<double> mlp_forward(const MlpParams& p, std::span<const double> input) {
  Activations act;
  forward_cached(p, input, act);
  return act.out;
}

double mlp_loss(const MlpParams& p, std::span<const double> input, std::span<const double> target) {
  const auto out = mlp_forward(p, input);
  if (target.size() != out.size()) throw std::invalid_argument("mlp: target width mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) loss += (out[i] - target[i]) * (out[i] - target[i]);
  return loss;
}

double mlp_loss_and_grad(const MlpParams& p, std::span<const double> input, std::span<const double> target,
                         std::span<double> grad, double weight) {
  if (grad.size() != p.theta.size()) throw std::invalid_argument("mlp: gradient buffer has wrong size");
  Activations act;
  forward_cached(p, input, act);
  const auto& A = p.arch;
  if (target.size() != A.output_dim) throw std::invalid_argument("mlp: target width mismatch");
  const std::size_t h = A.hidden, in = A.in_width(), out = A.output_dim;
  const auto o = offsets(A);
  const double* th = p.theta.data();
  const double* W2 = th + o[2];
  const double* W3 = th + o[4];
  double* gW1 = grad.data() + o[0];
  double* gb1 = grad.data() + o[1];
  double* gW2 = grad.data() + o[2];
  double* gb2 = grad.data() + o[3];
  double* gW3 = grad.data() + o[4];
  double* gb3 = grad.data() + o[5];

  double loss = 0.0;
  std::vector<double> d_out(out);
  for (std::size_t i = 0; i < out; ++i) {
    const double r = act.out[i] - target[i];
    loss += r * r;
    d_out[i] = 2.0 * r * weight;
  }

  std::vector<double> d_a2(h, 0.0), d_z2(h), d_a1(h, 0.0), d_z1(h);
  for (std::size_t o = 0; o < out; ++o) {
    gb3[o] += d_out[o];
    const double* w = W3 + o * h;
    double* gw = gW3 + o * h;
    for (std::size_t j = 0; j < h; ++j) {
      gw[j] += d_out[o] * act.a2[j];
      d_a2[j] += d_out[o] * w[j];
    }
  }
  for (std::size_t j = 0; j < h; ++j) d_z2[j] = d_a2[j] * silu_grad(act.z2[j]);
  for (std::size_t r = 0; r < h; ++r) {
    gb2[r] += d_z2[r];
    const double* w = W2 + r * h;
    double* gw = gW2 + r * h;
    const double dz = d_z2[r];
    for (std::size_t c = 0; c < h; ++c) {
      gw[c] += dz * act.a1[c];
      d_a1[c] += dz * w[c];
    }
  }
  for (std::size_t j = 0; j < h; ++j) d_z1[j] = d_a1[j] * silu_grad(act.z1[j]);
  for (std::size_t r = 0; r < h; ++r) {
    gb1[r] += d_z1[r];
    double* gw = gW1 + r * in;
    const double dz = d_z1[r];
    for (std::size_t c = 0; c < in; ++c) gw[c] += dz * input[c];
  }
  return loss;
}

void save_mlp(const MlpParams& p, const std::filesystem::path& dir, const std::string& stem) {
  nlohmann::json manifest;
  manifest["kind"] = "mlp";
  manifest["input_dim"] = p.arch.input_dim;
  manifest["time_features"] = p.arch.time_features;
  manifest["hidden"] = p.arch.hidden;
  manifest["output_dim"] = p.arch.output_dim;
  manifest["activation"] = "silu";
  manifest["tensors"] = nlohmann::json::array();
  for (const auto& ref : p.layout()) {
    std::vector<double> values(p.theta.begin() + static_cast<std::ptrdiff_t>(ref.offset),
                               p.theta.begin() + static_cast<std::ptrdiff_t>(ref.offset + shape_size(ref.shape)));
    const std::string file = stem + "." + ref.name + ".dtl";
    write_dtl(dir / file, Sample(ref.shape, std::move(values)));
    manifest["tensors"].push_back({{"name", ref.name}, {"file", file}, {"shape", ref.shape}});
  }
  write_file_atomic(dir / (stem + ".json"), manifest.dump(2) + "\n");
}

MlpParams load_mlp(const std::filesystem::path& dir, const std::string& stem) {
  const auto manifest_path = dir / (stem + ".json");
  if (!std::filesystem::exists(manifest_path)) throw DataError("model manifest not found: " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  MlpArch arch;
  arch.input_dim = manifest.at("input_dim").get<std::size_t>();
  arch.time_features = manifest.at("time_features").get<std::size_t>();
  arch.hidden = manifest.at("hidden").get<std::size_t>();
  arch.output_dim = manifest.at("output_dim").get<std::size_t>();
  MlpParams p = mlp_zero(arch);
  for (const auto& ref : p.layout()) {
    const Sample t = read_dtl(dir / (stem + "." + ref.name + ".dtl"));
    if (t.shape != ref.shape)
      throw DataError("tensor " + ref.name + " has shape " + shape_to_string(t.shape) + ", expected " +
                      shape_to_string(ref.shape));
    std::copy(t.values.begin(), t.values.end(), p.theta.begin() + static_cast<std::ptrdiff_t>(ref.offset));
  }
  return p;
}

}  // namespace dtl
