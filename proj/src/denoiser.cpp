#include "dtl/denoiser.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dtl/error.hpp"

namespace dtl {

std::size_t DenoiserModel::dim() const {
  if (const auto* mix = std::get_if<GaussianMixture>(&variant)) return mix->dim();
  return std::get<MlpParams>(variant).arch.input_dim;
}

std::string DenoiserModel::digest() const {
  std::string bytes;
  auto put = [&bytes](const std::vector<double>& v) {
    bytes.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  };
  if (const auto* mix = std::get_if<GaussianMixture>(&variant)) {
    bytes = "mixture";
    put(mix->weights);
    put(mix->variances);
    for (const auto& m : mix->means) put(m.values);
  } else {
    const auto& p = std::get<MlpParams>(variant);
    bytes = "mlp:" + std::to_string(p.arch.input_dim) + ":" + std::to_string(p.arch.time_features) + ":" +
            std::to_string(p.arch.hidden);
    put(p.theta);
  }
  return fnv1a_hex(bytes);
}

Sample eps_mlp(const MlpParams& params, const Sample& xt, const NoiseSchedule& sched, int t) {
  if (xt.size() != params.arch.input_dim || params.arch.output_dim != params.arch.input_dim)
    throw std::invalid_argument("eps_mlp: model dimension " + std::to_string(params.arch.input_dim) +
                                " does not match input of " + std::to_string(xt.size()) + " values");
  std::vector<double> input(xt.values);
  const auto feats = sinusoidal_features(sched.alpha_bar(t), params.arch.time_features);
  input.insert(input.end(), feats.begin(), feats.end());
  return Sample(xt.shape, mlp_forward(params, input));
}

Sample predict_eps(const DenoiserModel& model, const Sample& xt, const NoiseSchedule& sched, int t) {
  if (const auto* mix = std::get_if<GaussianMixture>(&model.variant)) return eps_analytic(*mix, xt, sched, t);
  return eps_mlp(std::get<MlpParams>(model.variant), xt, sched, t);
}

void TrainConfig::validate() const {
  if (batch_size < 1 || n_steps < 1) throw ConfigError("train: batch_size and n_steps must be positive");
  if (!(learning_rate >= 0.0)) throw ConfigError("train: learning_rate must be nonnegative");
}

TrainResult train_denoiser(const DataSampler& data, const NoiseSchedule& sched, const TrainConfig& cfg,
                           MlpParams params) {
  cfg.validate();
  RngStream rng(cfg.seed);
  const std::size_t d = params.arch.input_dim;
  TrainResult result;
  result.losses.reserve(static_cast<std::size_t>(cfg.n_steps));
  std::vector<double> grad(params.theta.size());
  std::vector<double> input(params.arch.in_width());
  const double weight = 1.0 / cfg.batch_size;

  for (int step = 0; step < cfg.n_steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const Sample x0 = data(rng);
      if (x0.size() != d) throw std::invalid_argument("train_denoiser: data sample dimension mismatch");
      const int t = static_cast<int>(rng.uniform_int(1, sched.steps()));
      const Sample eps = rng.normal_like(x0.shape);
      const double ab = sched.alpha_bar(t);
      const double sa = std::sqrt(ab), sn = std::sqrt(1.0 - ab);
      for (std::size_t j = 0; j < d; ++j) input[j] = sa * x0[j] + sn * eps[j];
      const auto feats = sinusoidal_features(ab, params.arch.time_features);
      std::copy(feats.begin(), feats.end(), input.begin() + static_cast<std::ptrdiff_t>(d));
      loss += weight * mlp_loss_and_grad(params, input, eps.values, grad, weight);
    }
    if (!std::isfinite(loss))
      throw NumericalError("train_denoiser: loss became non-finite at step " + std::to_string(step + 1));
    for (std::size_t i = 0; i < grad.size(); ++i) params.theta[i] -= cfg.learning_rate * grad[i];
    result.losses.push_back(loss);
  }
  result.params = std::move(params);
  return result;
}

TrainResult train_denoiser(const DataSampler& data, const NoiseSchedule& sched, const TrainConfig& cfg,
                           std::size_t time_features, std::size_t hidden) {
  RngStream probe(cfg.seed);
  const std::size_t d = data(probe).size();
  MlpArch arch{d, time_features, hidden, d};
  RngStream init_rng = RngStream(cfg.seed).fork(0x1417);
  return train_denoiser(data, sched, cfg, mlp_init(arch, init_rng));
}

std::string loss_trace_csv(const std::vector<double>& losses) {
  std::ostringstream out;
  out << "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) out << (i + 1) << ',' << format_double(losses[i]) << '\n';
  return out.str();
}

}  // namespace dtl
