#include <doctest.h>

#include <cmath>

#include "dtl/diffusion.hpp"
#include "dtl/embedding.hpp"
#include "dtl/error.hpp"

using namespace dtl;

namespace {

NoiseSchedule schedule(ScheduleKind kind, int T) {
  ScheduleSpec s;
  s.kind = kind;
  s.steps = T;
  return NoiseSchedule(s);
}

}  // namespace

TEST_CASE("one-step inversion at a component mean is exact") {
  const Sample mu = Sample::vector({0.4, -1.2, 2.0});
  const DenoiserModel model{single_gaussian(mu, 0.3)};
  const NoiseSchedule s = schedule(ScheduleKind::Linear, 1);
  const Sample latent = invert_ode(model, s, mu);
  RngStream rng(0);
  const Sample back = ddim_step(latent, predict_eps(model, latent, s, 1), s, 1, 0.0, rng).x_prev;
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(back[i] - mu[i]) < 1e-8);
}

TEST_CASE("inversion is deterministic and round-trips on the oracle") {
  const DenoiserModel model{single_gaussian(Sample({8}, 0.5), 0.25)};
  const NoiseSchedule s = schedule(ScheduleKind::Linear, 1000);
  const Sample x0 = Sample::vector({0.1, 0.9, 0.4, 0.6, 0.3, 0.7, 0.5, 0.2});
  const Sample z = invert_ode(model, s, x0);
  CHECK(invert_ode(model, s, x0) == z);
  CHECK(mse(ddim_generate(model, s, z), x0) < 1e-4);
  CHECK_THROWS_AS(invert_ode(model, s, Sample({8}, std::nan(""))), NumericalError);
}

TEST_CASE("latent norms concentrate near the dimension") {
  const GaussianMixture mix = single_gaussian(Sample({8}, 0.0), 0.25);
  const DenoiserModel model{mix};
  const NoiseSchedule s = schedule(ScheduleKind::Cosine, 200);
  RngStream rng(31);
  double total = 0;
  for (int i = 0; i < 200; ++i) {
    const Sample z = invert_ode(model, s, mix.sample(rng));
    total += dot(z, z);
  }
  const double mean = total / 200;
  CHECK(mean >= 0.7 * 8);
  CHECK(mean <= 1.3 * 8);
}

TEST_CASE("roundtrip report") {
  const DenoiserModel model{eight_gaussians(2.0, 0.1)};
  const NoiseSchedule s = schedule(ScheduleKind::Cosine, 50);
  RngStream rng(5);
  std::vector<Sample> latents, probes;
  for (int i = 0; i < 5; ++i) {
    latents.push_back(rng.normal_like({2}));
    probes.push_back(ddim_generate(model, s, latents.back()));
  }
  std::size_t k = 0;
  const EmbeddingReport exact = roundtrip_report(model, s, [&](const Sample&) { return latents[k++]; }, probes);
  CHECK(exact.mean_mse == 0.0);
  CHECK(exact.n_steps == 50);
  const EmbeddingReport zero = roundtrip_report(model, s, [](const Sample& x) { return Sample(x.shape, 0.0); }, probes);
  double sum = 0;
  for (double v : zero.per_sample_mse) sum += v;
  CHECK(zero.mean_mse == doctest::Approx(sum / 5));
  CHECK_THROWS_AS(roundtrip_report(model, s, [](const Sample& x) { return x; }, {}), std::invalid_argument);
}

TEST_CASE("a zero embedder collapses every probe to generate(0)") {
  const DenoiserModel model{eight_gaussians(2.0, 0.1)};
  const NoiseSchedule s = schedule(ScheduleKind::Cosine, 20);
  const MlpParams zero = mlp_zero(MlpArch{2, 0, 8, 2});
  CHECK(embed_net(zero, Sample::vector({1.0, 2.0})) == Sample({2}, 0.0));
  CHECK(ddim_generate(model, s, embed_net(zero, Sample::vector({-1.0, 0.5}))) ==
        ddim_generate(model, s, Sample({2}, 0.0)));
}

TEST_CASE("trained embedder beats constant baselines") {
  const GaussianMixture mix = eight_gaussians(2.0, 0.1);
  const DenoiserModel model{mix};
  const NoiseSchedule s = schedule(ScheduleKind::Cosine, 100);
  EmbedderConfig cfg;
  cfg.n_pairs = 10000;
  cfg.hidden = 64;
  cfg.train.n_steps = 4000;
  cfg.train.batch_size = 32;
  cfg.train.learning_rate = 1e-2;
  cfg.train.seed = 3;
  const EmbedderResult r = train_embedder(model, s, cfg);
  CHECK(r.pair_latents.size() == 10000);
  const Sample probe = Sample::vector({1.0, 1.0});
  CHECK(embed_net(r.params, probe) == embed_net(r.params, probe));

  RngStream rng(404);
  std::vector<Sample> held_latents, held;
  for (int i = 0; i < 500; ++i) {
    held_latents.push_back(rng.normal_like({2}));
    held.push_back(ddim_generate(model, s, held_latents.back()));
  }
  double latent_mse = 0;
  for (int i = 0; i < 500; ++i) latent_mse += mse(embed_net(r.params, held[i]), held_latents[i]) / 500;
  CHECK(latent_mse < 1.0);  // per-coordinate variance of x_T

  const auto net = roundtrip_report(model, s, [&](const Sample& x) { return embed_net(r.params, x); }, held);
  const auto constant = roundtrip_report(model, s, [](const Sample& x) { return Sample(x.shape, 0.0); }, held);
  CHECK(net.mean_mse < constant.mean_mse);
  CHECK_THROWS_AS(embed_net(r.params, Sample::vector({1.0, 2.0, 3.0})), std::invalid_argument);
}
