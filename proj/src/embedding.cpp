#include "dtl/embedding.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dtl/diffusion.hpp"
#include "dtl/error.hpp"

namespace dtl {

Sample invert_ode(const DenoiserModel& model, const NoiseSchedule& sched, const Sample& x0) {
  require_finite(x0, "invert_ode: input");
  Sample x = x0;
  for (int t = 1; t <= sched.steps(); ++t) {
    const double ab_prev = sched.alpha_bar(t - 1), ab = sched.alpha_bar(t);
    const Sample eps = predict_eps(model, x, sched, t - 1);
    const Sample x0_hat = lincomb(1.0 / std::sqrt(ab_prev), x, -std::sqrt(1.0 - ab_prev) / std::sqrt(ab_prev), eps);
    x = lincomb(std::sqrt(ab), x0_hat, std::sqrt(1.0 - ab), eps);
    if (!x.all_finite()) throw NumericalError("invert_ode: non-finite latent at t=" + std::to_string(t));
  }
  return x;
}

Sample embed_net(const MlpParams& params, const Sample& x0) {
  if (params.arch.time_features != 0 || params.arch.input_dim != x0.size())
    throw std::invalid_argument("embed_net: embedder does not accept inputs of " + std::to_string(x0.size()) +
                                " values");
  return Sample(x0.shape, mlp_forward(params, x0.values));
}

EmbedderResult train_embedder(const DenoiserModel& model, const NoiseSchedule& sched, const EmbedderConfig& cfg) {
  cfg.train.validate();
  if (cfg.n_pairs < 1) throw ConfigError("train_embedder: n_pairs must be positive");
  const std::size_t d = model.dim();
  Shape shape{d};
  if (const auto* mix = std::get_if<GaussianMixture>(&model.variant)) shape = mix->shape();

  EmbedderResult result;
  RngStream pair_rng = RngStream(cfg.train.seed).fork(1);
  for (int i = 0; i < cfg.n_pairs; ++i) {
    Sample latent = pair_rng.normal_like(shape);
    result.pair_samples.push_back(ddim_generate(model, sched, latent));
    result.pair_latents.push_back(std::move(latent));
  }

  RngStream init_rng = RngStream(cfg.train.seed).fork(2);
  MlpParams params = mlp_init(MlpArch{d, 0, cfg.hidden, d}, init_rng);
  RngStream batch_rng = RngStream(cfg.train.seed).fork(3);
  std::vector<double> grad(params.theta.size());
  const double weight = 1.0 / cfg.train.batch_size;
  for (int step = 0; step < cfg.train.n_steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (int b = 0; b < cfg.train.batch_size; ++b) {
      const auto i = static_cast<std::size_t>(batch_rng.uniform_int(0, cfg.n_pairs - 1));
      loss += weight * mlp_loss_and_grad(params, result.pair_samples[i].values, result.pair_latents[i].values, grad,
                                         weight);
    }
    if (!std::isfinite(loss))
      throw NumericalError("train_embedder: loss became non-finite at step " + std::to_string(step + 1));
    for (std::size_t k = 0; k < grad.size(); ++k) params.theta[k] -= cfg.train.learning_rate * grad[k];
    result.losses.push_back(loss);
  }
  result.params = std::move(params);
  return result;
}

EmbeddingReport roundtrip_report(const DenoiserModel& model, const NoiseSchedule& sched, const EmbedFn& embed_fn,
                                 std::span<const Sample> probes) {
  if (probes.empty()) throw std::invalid_argument("roundtrip_report: empty probe set");
  EmbeddingReport report;
  report.n_steps = sched.steps();
  for (const auto& probe : probes)
    report.per_sample_mse.push_back(mse(probe, ddim_generate(model, sched, embed_fn(probe))));
  report.mean_mse = std::accumulate(report.per_sample_mse.begin(), report.per_sample_mse.end(), 0.0) /
                    static_cast<double>(report.per_sample_mse.size());
  return report;
}

}  // namespace dtl
