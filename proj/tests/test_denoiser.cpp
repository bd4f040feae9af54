#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "dtl/denoiser.hpp"
#include "dtl/diffusion.hpp"
#include "dtl/error.hpp"

using namespace dtl;

namespace {

NoiseSchedule cosine(int T) {
  ScheduleSpec s;
  s.steps = T;
  return NoiseSchedule(s);
}

}  // namespace

TEST_CASE("single Gaussian closed form") {
  const GaussianMixture g = single_gaussian(Sample::vector({0.0}), 1.0);
  const Sample xt = Sample::vector({1.0});
  CHECK(mixture_posterior_mean(g, xt, 0.5)[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
  CHECK(eps_mixture(g, xt, 0.5)[0] == doctest::Approx(0.7071067811865476).epsilon(1e-14));
}

TEST_CASE("single Gaussian posterior mean agrees with Monte Carlo") {
  // E[x0 | x_t] estimated by self-normalized importance weights over prior draws.
  const GaussianMixture g = single_gaussian(Sample::vector({0.5}), 0.3);
  const double ab = 0.6, xt = 0.9;
  RngStream rng(77);
  double num = 0, den = 0;
  for (int i = 0; i < 1000000; ++i) {
    const double x0 = 0.5 + std::sqrt(0.3) * rng.normal();
    const double r = xt - std::sqrt(ab) * x0;
    const double w = std::exp(-r * r / (2 * (1 - ab)));
    num += w * x0;
    den += w;
  }
  CHECK(mixture_posterior_mean(g, Sample::vector({xt}), ab)[0] == doctest::Approx(num / den).epsilon(2e-3));
}

TEST_CASE("mirror-symmetric mixture has zero posterior mean at the midpoint") {
  GaussianMixture m{{0.5, 0.5}, {Sample::vector({-2.0, 1.0}), Sample::vector({2.0, -1.0})}, {0.2, 0.2}};
  m.validate();
  for (double ab : {0.01, 0.5, 0.99}) {
    const Sample pm = mixture_posterior_mean(m, Sample::vector({0.0, 0.0}), ab);
    CHECK(std::abs(pm[0]) < 1e-15);
    CHECK(std::abs(pm[1]) < 1e-15);
  }
}

TEST_CASE("responsibilities sum to one and eps stays bounded near alpha_bar = 1") {
  const GaussianMixture m = eight_gaussians(2.0, 0.1);
  RngStream rng(2);
  for (int i = 0; i < 200; ++i) {
    const Sample x = m.sample(rng);
    for (double ab : {1e-6, 0.3, 0.9, 1 - 1e-6}) {
      const auto r = mixture_responsibilities(m, x, ab);
      CHECK(std::abs(std::accumulate(r.begin(), r.end(), 0.0) - 1.0) < 1e-12);
    }
    const Sample e = eps_mixture(m, x, 1 - 1e-6);
    CHECK(e.all_finite());
    CHECK(norm(e) < 1.0);
  }
  // far outside the support log-sum-exp still behaves
  const auto r = mixture_responsibilities(m, Sample::vector({1e3, -1e3}), 1 - 1e-9);
  CHECK(std::abs(std::accumulate(r.begin(), r.end(), 0.0) - 1.0) < 1e-12);
  CHECK(eps_mixture(m, Sample::vector({0.3, 0.1}), 1.0) == Sample({2}, 0.0));
}

TEST_CASE("analytic eps minimizes the noise-prediction loss") {
  const GaussianMixture m{{0.3, 0.7}, {Sample::vector({-1.0}), Sample::vector({2.0})}, {0.1, 0.1}};
  const NoiseSchedule s = cosine(20);
  const int t = 8, n = 100000;
  RngStream rng(10);
  double base = 0, plus = 0, minus = 0;
  const double delta = 0.01;
  for (int i = 0; i < n; ++i) {
    const Sample x0 = m.sample(rng);
    const Sample eps = rng.normal_like({1});
    const Sample xt = forward_diffuse(x0, s, t, eps);
    const double g = eps_analytic(m, xt, s, t)[0];
    base += (eps[0] - g) * (eps[0] - g);
    plus += (eps[0] - g - delta) * (eps[0] - g - delta);
    minus += (eps[0] - g + delta) * (eps[0] - g + delta);
  }
  // Differences are +-2 delta sum(resid) + n delta^2; the cross term is pure noise.
  const double tol = 4 * 2 * delta * std::sqrt(base);
  CHECK(plus - base > -tol);
  CHECK(minus - base > -tol);
}

TEST_CASE("mixture validation") {
  CHECK_THROWS_AS((GaussianMixture{{0.5, 0.6}, {Sample::vector({0.0}), Sample::vector({1.0})}, {1, 1}}.validate()),
                  ConfigError);
  CHECK_THROWS_AS((GaussianMixture{{1.0}, {Sample::vector({0.0})}, {0.0}}.validate()), ConfigError);
  const GaussianMixture m = eight_gaussians(2.0, 0.1);
  CHECK_THROWS_AS(eps_mixture(m, Sample::vector({0.0}), 0.5), std::invalid_argument);
}

TEST_CASE("mlp forward basics") {
  const MlpArch arch{3, 4, 16, 3};
  CHECK(arch.parameter_count() == 16 * 7 + 16 + 16 * 16 + 16 + 3 * 16 + 3);
  const MlpParams zero = mlp_zero(arch);
  const NoiseSchedule s = cosine(10);
  const Sample x = Sample::vector({0.1, 0.2, 0.3});
  CHECK(eps_mlp(zero, x, s, 5) == Sample({3}, 0.0));
  RngStream rng(1);
  const MlpParams p = mlp_init(arch, rng);
  const Sample y = eps_mlp(p, x, s, 5);
  CHECK(y.shape == x.shape);
  CHECK(eps_mlp(p, x, s, 5) == y);
  CHECK(y != eps_mlp(p, x, s, 6));
  CHECK_THROWS_AS(eps_mlp(p, Sample::vector({0.1}), s, 5), std::invalid_argument);
  CHECK_THROWS_AS((MlpArch{3, 3, 16, 3}.validate()), ConfigError);
}

TEST_CASE("sinusoidal features") {
  const auto f = sinusoidal_features(0.5, 4);
  REQUIRE(f.size() == 4);
  for (std::size_t i = 0; i < 2; ++i) CHECK(f[2 * i] * f[2 * i] + f[2 * i + 1] * f[2 * i + 1] == doctest::Approx(1.0));
  CHECK(sinusoidal_features(0.5, 0).empty());
}

TEST_CASE("reverse-mode gradient matches central differences") {
  const MlpArch arch{2, 16, 32, 2};
  RngStream rng(5);
  MlpParams p = mlp_init(arch, rng);
  std::vector<double> input{0.7, -1.1};
  const auto feats = sinusoidal_features(0.37, 16);
  input.insert(input.end(), feats.begin(), feats.end());
  const std::vector<double> target{0.4, -0.9};
  std::vector<double> grad(p.theta.size(), 0.0);
  const double loss = mlp_loss_and_grad(p, input, target, grad, 1.0);
  CHECK(loss == doctest::Approx(mlp_loss(p, input, target)).epsilon(1e-14));
  const double h = 1e-5;
  int checked = 0;
  for (int i = 0; i < 50; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(p.theta.size()) - 1));
    const double keep = p.theta[j];
    p.theta[j] = keep + h;
    const double up = mlp_loss(p, input, target);
    p.theta[j] = keep - h;
    const double down = mlp_loss(p, input, target);
    p.theta[j] = keep;
    const double fd = (up - down) / (2 * h);
    const double scale = std::max({std::abs(fd), std::abs(grad[j]), 1e-6});
    CAPTURE(j);
    CHECK(std::abs(fd - grad[j]) / scale <= 1e-4);
    ++checked;
  }
  CHECK(checked == 50);
}

TEST_CASE("training with zero learning rate leaves parameters unchanged") {
  const GaussianMixture m = eight_gaussians(2.0, 0.1);
  const NoiseSchedule s = cosine(20);
  RngStream init_rng(3);
  const MlpParams init = mlp_init(MlpArch{2, 8, 16, 2}, init_rng);
  TrainConfig cfg;
  cfg.n_steps = 50;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.0;
  const TrainResult r = train_denoiser([&](RngStream& g) { return m.sample(g); }, s, cfg, init);
  CHECK(r.params == init);
  CHECK(r.losses.size() == 50);
}

TEST_CASE("training is seed-reproducible and learns toward the oracle") {
  const GaussianMixture m = eight_gaussians(2.0, 0.1);
  const NoiseSchedule s = cosine(50);
  TrainConfig cfg;
  cfg.n_steps = 3000;
  cfg.batch_size = 16;
  cfg.learning_rate = 1e-2;
  cfg.seed = 4;
  auto sampler = [&](RngStream& g) { return m.sample(g); };
  const TrainResult a = train_denoiser(sampler, s, cfg, 8, 64);
  const TrainResult b = train_denoiser(sampler, s, cfg, 8, 64);
  CHECK(a.params == b.params);
  CHECK(a.losses == b.losses);

  const DenoiserModel model{a.params};
  RngStream rng(99);
  double disagree = 0, eps_norm = 0;
  for (int i = 0; i < 1000; ++i) {
    const int t = static_cast<int>(rng.uniform_int(1, 50));
    const Sample eps = rng.normal_like({2});
    const Sample xt = forward_diffuse(m.sample(rng), s, t, eps);
    const Sample oracle = eps_analytic(m, xt, s, t);
    disagree += squared_distance(predict_eps(model, xt, s, t), oracle);
    eps_norm += dot(oracle, oracle);
  }
  CHECK(disagree < eps_norm);
}

TEST_CASE("non-finite loss aborts training") {
  const NoiseSchedule s = cosine(10);
  TrainConfig cfg;
  cfg.n_steps = 10;
  cfg.batch_size = 2;
  auto bad = [](RngStream&) { return Sample::vector({std::nan(""), 0.0}); };
  CHECK_THROWS_AS(train_denoiser(bad, s, cfg, 4, 8), NumericalError);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train_denoiser(bad, s, cfg, 4, 8), ConfigError);
}

TEST_CASE("model files round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "dtl_mlp_test";
  std::filesystem::remove_all(dir);
  RngStream rng(8);
  const MlpParams p = mlp_init(MlpArch{4, 6, 10, 4}, rng);
  save_mlp(p, dir, "denoiser");
  CHECK(std::filesystem::exists(dir / "denoiser.json"));
  CHECK(std::filesystem::exists(dir / "denoiser.W2.dtl"));
  CHECK(load_mlp(dir, "denoiser") == p);
  CHECK(DenoiserModel{p}.digest() == DenoiserModel{load_mlp(dir, "denoiser")}.digest());
  CHECK_THROWS_AS(load_mlp(dir, "other"), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("loss trace csv") {
  CHECK(loss_trace_csv({1.5, 0.25}) == "step,loss\n1,1.5\n2,0.25\n");
}
