#pragma once

#include "dtl/denoiser.hpp"
#include "dtl/rng.hpp"
#include "dtl/schedule.hpp"
#include "dtl/tensor.hpp"

namespace dtl {

/// Fixed reverse-process variance used by the ancestral sampler.
enum class ReverseVariance { PosteriorBetaTilde, ForwardBeta };

/// x_t = sqrt(ab_t) x0 + sqrt(1 - ab_t) eps, for t in [0, T].
Sample forward_diffuse(const Sample& x0, const NoiseSchedule& sched, int t, const Sample& eps);

/// One Markov transition q(x_t | x_{t-1}): sqrt(alpha_t) x_{t-1} + sqrt(beta_t) z.
Sample forward_step(const Sample& x_prev, const NoiseSchedule& sched, int t, const Sample& z);

/// Mean of the forward-process posterior q(x_{t-1} | x_t, x0).
Sample posterior_mean(const Sample& x0, const Sample& xt, const NoiseSchedule& sched, int t);

/// Reverse mean parameterized by a noise prediction.
Sample mean_from_eps(const Sample& xt, const Sample& eps_pred, const NoiseSchedule& sched, int t);

/// One ancestral step of the DDPM sampler; no noise is added at t = 1.
Sample ddpm_step(const DenoiserModel& model, const Sample& xt, const NoiseSchedule& sched, int t, RngStream& rng,
                 ReverseVariance variance = ReverseVariance::PosteriorBetaTilde);

/// Full ancestral sampling loop from x_T ~ N(0, I) drawn from `rng`.
Sample ddpm_sample(const DenoiserModel& model, const NoiseSchedule& sched, const Shape& shape, RngStream& rng,
                   ReverseVariance variance = ReverseVariance::PosteriorBetaTilde);

struct DdimStep {
  Sample x_prev;
  Sample x0_pred;
};

/// Generalized (eta) DDIM update from t to t - 1. The rng is only consulted
/// when sigma_t > 0.
DdimStep ddim_step(const Sample& xt, const Sample& eps_pred, const NoiseSchedule& sched, int t, double eta,
                   RngStream& rng);

/// Throws ConfigError naming the schedule and timestep when
/// eta * beta_tilde_t > 1 - alpha_bar_{t-1} for some t.
void validate_eta(const NoiseSchedule& sched, double eta);

/// Folds ddim_step from t = T down to 1 starting at xT.
Sample ddim_sample(const DenoiserModel& model, const NoiseSchedule& sched, const Sample& xT, double eta,
                   RngStream& rng);

/// Deterministic (eta = 0) generator: latent x_T -> x_0.
Sample ddim_generate(const DenoiserModel& model, const NoiseSchedule& sched, const Sample& xT);

/// KL( N(mu_tilde_t, beta_tilde_t I) || N(model_mean, model_var I) ) in nats, t >= 2.
double vlb_term_kl(const Sample& x0, const Sample& xt, const Sample& model_mean, double model_var,
                   const NoiseSchedule& sched, int t);

/// KL between isotropic Gaussians with the given means and scalar variances.
double gaussian_kl(const Sample& mean_p, double var_p, const Sample& mean_q, double var_q);

}  // namespace dtl
