#pragma once

#include <vector>

#include "dtl/rng.hpp"
#include "dtl/schedule.hpp"
#include "dtl/tensor.hpp"

namespace dtl {

/// Isotropic Gaussian mixture used as a closed-form data distribution.
struct GaussianMixture {
  std::vector<double> weights;
  std::vector<Sample> means;
  std::vector<double> variances;

  std::size_t components() const { return weights.size(); }
  std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }
  const Shape& shape() const { return means.front().shape; }

  void validate() const;
  Sample sample(RngStream& rng) const;
  /// Mean and per-coordinate variance of the mixture (as a d-vector pair).
  Sample mean() const;
  Sample coordinate_variance() const;
};

GaussianMixture single_gaussian(Sample mean, double variance);
/// Eight equal-weight components on a circle of `radius` in the plane.
GaussianMixture eight_gaussians(double radius, double component_std);

/// Posterior component probabilities p(i | x_t) where x_t has marginal
/// sum_i w_i N(sqrt(ab) mu_i, (ab v_i + 1 - ab) I). Log-sum-exp normalized.
std::vector<double> mixture_responsibilities(const GaussianMixture& mix, const Sample& xt, double alpha_bar);

/// E[x0 | x_t] under the mixture prior.
Sample mixture_posterior_mean(const GaussianMixture& mix, const Sample& xt, double alpha_bar);

/// Optimal noise predictor (x_t - sqrt(ab) E[x0|x_t]) / sqrt(1 - ab), evaluated
/// in the algebraically equivalent form
///   sum_i r_i sqrt(1 - ab) (x_t - sqrt(ab) mu_i) / (ab v_i + 1 - ab)
/// which stays finite as ab -> 1 and is exactly 0 at ab = 1.
Sample eps_mixture(const GaussianMixture& mix, const Sample& xt, double alpha_bar);

Sample eps_analytic(const GaussianMixture& mix, const Sample& xt, const NoiseSchedule& sched, int t);

}  // namespace dtl
