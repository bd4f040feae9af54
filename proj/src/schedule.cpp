#include "dtl/schedule.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "dtl/error.hpp"
#include "dtl/tensor.hpp"

namespace dtl {

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::Linear: return "linear";
    case ScheduleKind::Quadratic: return "quadratic";
    case ScheduleKind::Cosine: return "cosine";
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "linear") return ScheduleKind::Linear;
  if (name == "quadratic") return ScheduleKind::Quadratic;
  if (name == "cosine") return ScheduleKind::Cosine;
  throw ConfigError("unknown schedule kind '" + name + "' (expected linear, quadratic or cosine)");
}

void ScheduleSpec::validate() const {
  if (steps < 1) throw ConfigError("schedule: T must be >= 1, got " + std::to_string(steps));
  if (kind == ScheduleKind::Cosine) {
    if (!(cosine_offset > 0.0)) throw ConfigError("schedule: cosine_offset must be > 0");
  } else if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ConfigError("schedule: need 0 < beta_start <= beta_end < 1");
  }
}

namespace {

std::vector<double> raw_betas(const ScheduleSpec& spec) {
  const int T = spec.steps;
  std::vector<double> beta(static_cast<std::size_t>(T) + 1, 0.0);
  // Interpolation fraction for step t; a single step sits at beta_start.
  auto frac = [T](int t) { return T == 1 ? 0.0 : static_cast<double>(t - 1) / (T - 1); };
  switch (spec.kind) {
    case ScheduleKind::Linear:
      for (int t = 1; t <= T; ++t) beta[t] = spec.beta_start + frac(t) * (spec.beta_end - spec.beta_start);
      break;
    case ScheduleKind::Quadratic: {
      const double lo = std::sqrt(spec.beta_start), hi = std::sqrt(spec.beta_end);
      for (int t = 1; t <= T; ++t) {
        const double r = lo + frac(t) * (hi - lo);
        beta[t] = r * r;
      }
      break;
    }
    case ScheduleKind::Cosine: {
      const double s = spec.cosine_offset;
      auto f = [s](double u) {
        const double c = std::cos((u + s) / (1.0 + s) * std::numbers::pi / 2.0);
        return c * c;
      };
      const double f0 = f(0.0);
      double prev = 1.0;
      for (int t = 1; t <= T; ++t) {
        const double cur = f(static_cast<double>(t) / T) / f0;
        beta[t] = std::min(1.0 - cur / prev, 0.999);
        prev = cur;
      }
      break;
    }
  }
  return beta;
}

}  // namespace

NoiseSchedule::NoiseSchedule(const ScheduleSpec& spec) : spec_(spec) {
  spec.validate();
  const auto T = static_cast<std::size_t>(spec.steps);
  beta_ = raw_betas(spec);
  alpha_.assign(T + 1, 1.0);
  alpha_bar_.assign(T + 1, 1.0);
  beta_tilde_.assign(T + 1, 0.0);
  for (std::size_t t = 1; t <= T; ++t) {
    const double b = beta_[t];
    if (!(b > 0.0 && b < 1.0))
      throw ConfigError("schedule " + to_string(spec.kind) + ": beta_" + std::to_string(t) + " = " +
                        format_double(b) + " outside (0,1)");
    alpha_[t] = 1.0 - b;
    alpha_bar_[t] = alpha_bar_[t - 1] * alpha_[t];
    if (!(alpha_bar_[t] > 0.0 && alpha_bar_[t] < alpha_bar_[t - 1]))
      throw ConfigError("schedule " + to_string(spec.kind) + ": alpha_bar not strictly decreasing at t=" +
                        std::to_string(t));
  }
  // beta_tilde_1 stays 0: the posterior at t = 1 is a point mass on x0.
  for (std::size_t t = 2; t <= T; ++t)
    beta_tilde_[t] = (1.0 - alpha_bar_[t - 1]) / (1.0 - alpha_bar_[t]) * beta_[t];
}

std::size_t NoiseSchedule::check(int t, int lowest) const {
  if (t < lowest || t > spec_.steps)
    throw std::out_of_range("timestep " + std::to_string(t) + " outside [" + std::to_string(lowest) + ", " +
                            std::to_string(spec_.steps) + "]");
  return static_cast<std::size_t>(t);
}

std::string NoiseSchedule::to_csv() const {
  std::ostringstream out;
  out << "t,alpha,alpha_bar,beta,beta_tilde\n";
  for (int t = 1; t <= spec_.steps; ++t) {
    const auto i = static_cast<std::size_t>(t);
    out << t << ',' << format_double(alpha_[i]) << ',' << format_double(alpha_bar_[i]) << ','
        << format_double(beta_[i]) << ',' << format_double(beta_tilde_[i]) << '\n';
  }
  return out.str();
}

NoiseSchedule build_schedule(const ScheduleSpec& spec) { return NoiseSchedule(spec); }

double sigma_t(const NoiseSchedule& sched, int t, double eta) {
  if (!(eta >= 0.0)) throw std::invalid_argument("sigma_t: eta must be >= 0");
  return std::sqrt(eta * sched.beta_tilde(t));
}

double max_valid_eta(const NoiseSchedule& sched) {
  double best = std::numeric_limits<double>::infinity();
  for (int t = 2; t <= sched.steps(); ++t) best = std::min(best, (1.0 - sched.alpha_bar(t - 1)) / sched.beta_tilde(t));
  return best;
}

}  // namespace dtl
