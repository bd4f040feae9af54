#pragma once

#include <functional>
#include <span>
#include <vector>

#include "dtl/denoiser.hpp"
#include "dtl/schedule.hpp"

namespace dtl {

using EmbedFn = std::function<Sample(const Sample&)>;

/// Deterministic DDIM flow run forward (t = 1..T) to recover the latent x_T
/// that regenerates x0. Each step reuses the noise predicted at the previous
/// (less noisy) point: eps = eps_theta(x_{t-1}, ab_{t-1}).
Sample invert_ode(const DenoiserModel& model, const NoiseSchedule& sched, const Sample& x0);

struct EmbedderConfig {
  TrainConfig train;
  int n_pairs = 10000;
  std::size_t hidden = 128;
};

struct EmbedderResult {
  MlpParams params;
  std::vector<double> losses;
  std::vector<Sample> pair_latents;
  std::vector<Sample> pair_samples;
};

/// Pair-supervised embedder: latents x_T ~ N(0, I) are pushed through the
/// deterministic generator and an MLP (no time input) learns x0 -> x_T.
EmbedderResult train_embedder(const DenoiserModel& model, const NoiseSchedule& sched, const EmbedderConfig& cfg);

/// Single forward pass of a trained embedder.
Sample embed_net(const MlpParams& params, const Sample& x0);

struct EmbeddingReport {
  std::vector<double> per_sample_mse;
  double mean_mse = 0.0;
  int n_steps = 0;
};

/// Round trip probe -> embed_fn -> deterministic generator, scored by MSE.
EmbeddingReport roundtrip_report(const DenoiserModel& model, const NoiseSchedule& sched, const EmbedFn& embed_fn,
                                 std::span<const Sample> probes);

}  // namespace dtl
