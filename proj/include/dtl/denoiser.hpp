#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "dtl/mixture.hpp"
#include "dtl/mlp.hpp"
#include "dtl/schedule.hpp"

namespace dtl {

/// A noise predictor eps(x_t, alpha_bar_t): either the closed-form optimum for
/// a Gaussian-mixture data distribution or a trained MLP.
struct DenoiserModel {
  std::variant<GaussianMixture, MlpParams> variant;

  std::size_t dim() const;
  /// Short content digest used in manifests.
  std::string digest() const;
};

/// Predicted noise at timestep t in [0, T] (t = 0 evaluates at alpha_bar = 1).
Sample predict_eps(const DenoiserModel& model, const Sample& xt, const NoiseSchedule& sched, int t);

Sample eps_mlp(const MlpParams& params, const Sample& xt, const NoiseSchedule& sched, int t);

struct TrainConfig {
  int batch_size = 64;
  int n_steps = 20000;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  MlpParams params;
  std::vector<double> losses;  // batch-mean squared error per step
};

using DataSampler = std::function<Sample(RngStream&)>;

/// Plain SGD on the unweighted noise-prediction loss: draw x0, a uniform
/// timestep and Gaussian noise, diffuse, and step on ||eps - eps_theta||^2.
/// Starts from `init` (pass mlp_init output for a fresh model).
TrainResult train_denoiser(const DataSampler& data, const NoiseSchedule& sched, const TrainConfig& cfg,
                           MlpParams init);

/// Convenience overload: architecture d -> h -> h -> d with k time features,
/// initialized from cfg.seed.
TrainResult train_denoiser(const DataSampler& data, const NoiseSchedule& sched, const TrainConfig& cfg,
                           std::size_t time_features = 16, std::size_t hidden = 128);

/// Writes `step,loss` rows.
std::string loss_trace_csv(const std::vector<double>& losses);

}  // namespace dtl
