#include "dtl/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dtl/error.hpp"

namespace dtl {

void GaussianMixture::validate() const {
  if (weights.empty()) throw ConfigError("mixture: no components");
  if (means.size() != weights.size() || variances.size() != weights.size())
    throw ConfigError("mixture: weights, means and variances must have equal length");
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0)) throw ConfigError("mixture: weights must be positive");
    if (!(variances[i] > 0.0)) throw ConfigError("mixture: variances must be positive");
    if (means[i].shape != means.front().shape) throw ConfigError("mixture: component means differ in shape");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("mixture: weights must sum to 1");
}

Sample GaussianMixture::sample(RngStream& rng) const {
  double u = rng.uniform();
  std::size_t k = 0;
  while (k + 1 < weights.size() && u >= weights[k]) {
    u -= weights[k];
    ++k;
  }
  Sample x = rng.normal_like(shape());
  const double sd = std::sqrt(variances[k]);
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = means[k][j] + sd * x[j];
  return x;
}

Sample GaussianMixture::mean() const {
  Sample m(shape(), 0.0);
  for (std::size_t i = 0; i < components(); ++i) axpy(weights[i], means[i], m);
  return m;
}

Sample GaussianMixture::coordinate_variance() const {
  const Sample m = mean();
  Sample v(shape(), 0.0);
  for (std::size_t i = 0; i < components(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double d = means[i][j] - m[j];
      v[j] += weights[i] * (variances[i] + d * d);
    }
  return v;
}

GaussianMixture single_gaussian(Sample mean, double variance) {
  GaussianMixture mix{{1.0}, {std::move(mean)}, {variance}};
  mix.validate();
  return mix;
}

GaussianMixture eight_gaussians(double radius, double component_std) {
  GaussianMixture mix;
  for (int k = 0; k < 8; ++k) {
    const double a = k * std::numbers::pi / 4.0;
    mix.weights.push_back(1.0 / 8.0);
    mix.means.push_back(Sample::vector({radius * std::cos(a), radius * std::sin(a)}));
    mix.variances.push_back(component_std * component_std);
  }
  return mix;
}

namespace {

void require_dim(const GaussianMixture& mix, const Sample& xt) {
  if (xt.size() != mix.dim())
    throw std::invalid_argument("mixture: input has " + std::to_string(xt.size()) + " values, mixture dimension is " +
                                std::to_string(mix.dim()));
}

}  // namespace

std::vector<double> mixture_responsibilities(const GaussianMixture& mix, const Sample& xt, double alpha_bar) {
  require_dim(mix, xt);
  const double sa = std::sqrt(alpha_bar);
  const auto d = static_cast<double>(mix.dim());
  std::vector<double> logp(mix.components());
  for (std::size_t i = 0; i < mix.components(); ++i) {
    const double s = alpha_bar * mix.variances[i] + (1.0 - alpha_bar);
    double r2 = 0.0;
    for (std::size_t j = 0; j < xt.size(); ++j) {
      const double diff = xt[j] - sa * mix.means[i][j];
      r2 += diff * diff;
    }
    logp[i] = std::log(mix.weights[i]) - 0.5 * d * std::log(s) - 0.5 * r2 / s;
  }
  const double top = *std::max_element(logp.begin(), logp.end());
  double z = 0.0;
  for (double& l : logp) {
    l = std::exp(l - top);
    z += l;
  }
  for (double& l : logp) l /= z;
  return logp;
}

Sample mixture_posterior_mean(const GaussianMixture& mix, const Sample& xt, double alpha_bar) {
  const auto r = mixture_responsibilities(mix, xt, alpha_bar);
  const double sa = std::sqrt(alpha_bar);
  Sample out(xt.shape, 0.0);
  for (std::size_t i = 0; i < mix.components(); ++i) {
    const double s = alpha_bar * mix.variances[i] + (1.0 - alpha_bar);
    const double gain = sa * mix.variances[i] / s;
    for (std::size_t j = 0; j < out.size(); ++j)
      out[j] += r[i] * (mix.means[i][j] + gain * (xt[j] - sa * mix.means[i][j]));
  }
  return out;
}

Sample eps_mixture(const GaussianMixture& mix, const Sample& xt, double alpha_bar) {
  const auto r = mixture_responsibilities(mix, xt, alpha_bar);
  const double sa = std::sqrt(alpha_bar);
  const double sn = std::sqrt(1.0 - alpha_bar);
  Sample out(xt.shape, 0.0);
  for (std::size_t i = 0; i < mix.components(); ++i) {
    const double c = r[i] * sn / (alpha_bar * mix.variances[i] + (1.0 - alpha_bar));
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += c * (xt[j] - sa * mix.means[i][j]);
  }
  return out;
}

Sample eps_analytic(const GaussianMixture& mix, const Sample& xt, const NoiseSchedule& sched, int t) {
  return eps_mixture(mix, xt, sched.alpha_bar(t));
}

}  // namespace dtl
