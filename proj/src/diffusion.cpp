#include "dtl/diffusion.hpp"

#include <cmath>
#include <stdexcept>

#include "dtl/error.hpp"

namespace dtl {

Sample forward_diffuse(const Sample& x0, const NoiseSchedule& sched, int t, const Sample& eps) {
  const double ab = sched.alpha_bar(t);
  return lincomb(std::sqrt(ab), x0, std::sqrt(1.0 - ab), eps);
}

Sample forward_step(const Sample& x_prev, const NoiseSchedule& sched, int t, const Sample& z) {
  return lincomb(std::sqrt(sched.alpha(t)), x_prev, std::sqrt(sched.beta(t)), z);
}

Sample posterior_mean(const Sample& x0, const Sample& xt, const NoiseSchedule& sched, int t) {
  const double ab = sched.alpha_bar(t), ab_prev = sched.alpha_bar(t - 1);
  const double c_t = std::sqrt(sched.alpha(t)) * (1.0 - ab_prev) / (1.0 - ab);
  const double c_0 = std::sqrt(ab_prev) * sched.beta(t) / (1.0 - ab);
  return lincomb(c_t, xt, c_0, x0);
}

Sample mean_from_eps(const Sample& xt, const Sample& eps_pred, const NoiseSchedule& sched, int t) {
  const double a = sched.alpha(t);
  const double inv = 1.0 / std::sqrt(a);
  return lincomb(inv, xt, -inv * (1.0 - a) / std::sqrt(1.0 - sched.alpha_bar(t)), eps_pred);
}

Sample ddpm_step(const DenoiserModel& model, const Sample& xt, const NoiseSchedule& sched, int t, RngStream& rng,
                 ReverseVariance variance) {
  Sample mean = mean_from_eps(xt, predict_eps(model, xt, sched, t), sched, t);
  if (t > 1) {
    const double var = variance == ReverseVariance::PosteriorBetaTilde ? sched.beta_tilde(t) : sched.beta(t);
    axpy(std::sqrt(var), rng.normal_like(xt.shape), mean);
  }
  return mean;
}

Sample ddpm_sample(const DenoiserModel& model, const NoiseSchedule& sched, const Shape& shape, RngStream& rng,
                   ReverseVariance variance) {
  if (shape_size(shape) != model.dim())
    throw std::invalid_argument("ddpm_sample: shape " + shape_to_string(shape) + " does not match model dimension " +
                                std::to_string(model.dim()));
  Sample x = rng.normal_like(shape);
  for (int t = sched.steps(); t >= 1; --t) x = ddpm_step(model, x, sched, t, rng, variance);
  require_finite(x, "ddpm_sample");
  return x;
}

DdimStep ddim_step(const Sample& xt, const Sample& eps_pred, const NoiseSchedule& sched, int t, double eta,
                   RngStream& rng) {
  require_same_shape(xt, eps_pred, "ddim_step");
  if (t < 1 || t > sched.steps()) throw std::out_of_range("ddim_step: timestep " + std::to_string(t) + " out of range");
  const double ab = sched.alpha_bar(t), ab_prev = sched.alpha_bar(t - 1);
  const double sigma = sigma_t(sched, t, eta);
  const double dir_var = 1.0 - ab_prev - sigma * sigma;
  if (dir_var < 0.0)
    throw ConfigError("ddim_step: eta=" + format_double(eta) + " gives sigma_t^2 > 1 - alpha_bar_{t-1} at t=" +
                      std::to_string(t) + " for the " + to_string(sched.spec().kind) + " schedule");
  DdimStep out;
  out.x0_pred = lincomb(1.0 / std::sqrt(ab), xt, -std::sqrt(1.0 - ab) / std::sqrt(ab), eps_pred);
  out.x_prev = lincomb(std::sqrt(ab_prev), out.x0_pred, std::sqrt(dir_var), eps_pred);
  if (sigma > 0.0) axpy(sigma, rng.normal_like(xt.shape), out.x_prev);
  return out;
}

void validate_eta(const NoiseSchedule& sched, double eta) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw ConfigError("eta must be a finite nonnegative number");
  for (int t = 1; t <= sched.steps(); ++t) {
    const double s = sigma_t(sched, t, eta);
    if (1.0 - sched.alpha_bar(t - 1) - s * s < 0.0)
      throw ConfigError("eta=" + format_double(eta) + " is invalid for the " + to_string(sched.spec().kind) +
                        " schedule (T=" + std::to_string(sched.steps()) + "): sigma_t^2 > 1 - alpha_bar_{t-1} at t=" +
                        std::to_string(t));
  }
}

Sample ddim_sample(const DenoiserModel& model, const NoiseSchedule& sched, const Sample& xT, double eta,
                   RngStream& rng) {
  require_finite(xT, "ddim_sample: latent");
  validate_eta(sched, eta);
  Sample x = xT;
  for (int t = sched.steps(); t >= 1; --t) x = ddim_step(x, predict_eps(model, x, sched, t), sched, t, eta, rng).x_prev;
  require_finite(x, "ddim_sample");
  return x;
}

Sample ddim_generate(const DenoiserModel& model, const NoiseSchedule& sched, const Sample& xT) {
  RngStream unused(0);
  return ddim_sample(model, sched, xT, 0.0, unused);
}

double gaussian_kl(const Sample& mean_p, double var_p, const Sample& mean_q, double var_q) {
  if (!(var_p > 0.0) || !(var_q > 0.0)) throw std::invalid_argument("gaussian_kl: variances must be positive");
  const auto d = static_cast<double>(mean_p.size());
  const double kl =
      0.5 * (d * (var_p / var_q - 1.0 + std::log(var_q / var_p)) + squared_distance(mean_p, mean_q) / var_q);
  return std::max(kl, 0.0);
}

double vlb_term_kl(const Sample& x0, const Sample& xt, const Sample& model_mean, double model_var,
                   const NoiseSchedule& sched, int t) {
  if (t < 2) throw std::out_of_range("vlb_term_kl: needs t >= 2");
  if (!(model_var > 0.0)) throw std::invalid_argument("vlb_term_kl: model variance must be positive");
  return gaussian_kl(posterior_mean(x0, xt, sched, t), sched.beta_tilde(t), model_mean, model_var);
}

}  // namespace dtl
