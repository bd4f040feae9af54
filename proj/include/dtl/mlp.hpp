#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dtl/rng.hpp"

namespace dtl {

struct MlpArch {
  std::size_t input_dim = 0;      // data dimension d
  std::size_t time_features = 0;  // k sinusoidal features, even (0 disables)
  std::size_t hidden = 128;
  std::size_t output_dim = 0;

  std::size_t in_width() const { return input_dim + time_features; }
  std::size_t parameter_count() const;
  void validate() const;
  bool operator==(const MlpArch&) const = default;
};

/// Weights of a (d + k) -> h -> h -> out perceptron with SiLU activations.
///
/// All parameters live in one contiguous vector so optimizers and gradient
/// checks can treat them uniformly. Layout: W1 (h x in), b1, W2 (h x h), b2,
/// W3 (out x h), b3, matrices row-major.
struct MlpParams {
  MlpArch arch;
  std::vector<double> theta;

  struct TensorRef {
    std::string name;
    std::size_t offset;
    Shape shape;
  };
  std::vector<TensorRef> layout() const;

  bool operator==(const MlpParams&) const = default;
};

MlpParams mlp_zero(const MlpArch& arch);
/// Normal init with variance 1/fan_in for weights, zero biases.
MlpParams mlp_init(const MlpArch& arch, RngStream& rng);

/// sin/cos pairs of alpha_bar at k/2 frequencies spaced geometrically in [1, 1e4].
std::vector<double> sinusoidal_features(double alpha_bar, std::size_t k);

/// Forward pass on a flat input (d values, plus the time features when k > 0).
std::vector<double> mlp_forward(const MlpParams& p, std::span<const double> input);

/// Squared-error loss ||target - f(input)||^2 and its parameter gradient,
/// added into `grad` (same layout as theta) scaled by `weight`.
double mlp_loss_and_grad(const MlpParams& p, std::span<const double> input, std::span<const double> target,
                         std::span<double> grad, double weight);

double mlp_loss(const MlpParams& p, std::span<const double> input, std::span<const double> target);

/// One DTL1 file per tensor plus `<stem>.json` manifest listing names and shapes.
void save_mlp(const MlpParams& p, const std::filesystem::path& dir, const std::string& stem);
MlpParams load_mlp(const std::filesystem::path& dir, const std::string& stem);

}  // namespace dtl
