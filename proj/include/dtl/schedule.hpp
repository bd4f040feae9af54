#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dtl {

enum class ScheduleKind { Linear, Quadratic, Cosine };

std::string to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(const std::string& name);

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::Cosine;
  int steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  double cosine_offset = 0.008;

  void validate() const;
};

/// Diffusion coefficients for timesteps t = 1..T.
///
/// Every array is indexed by the timestep itself. Slot 0 of alpha, beta and
/// beta_tilde is unused (alpha[0] = 1, beta[0] = beta_tilde[0] = 0), while
/// alpha_bar[0] = 1 is the clean-data sentinel used by the t - 1 lookups.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(const ScheduleSpec& spec);

  const ScheduleSpec& spec() const { return spec_; }
  int steps() const { return spec_.steps; }

  double alpha(int t) const { return alpha_[check(t, 1)]; }
  double alpha_bar(int t) const { return alpha_bar_[check(t, 0)]; }
  double beta(int t) const { return beta_[check(t, 1)]; }
  double beta_tilde(int t) const { return beta_tilde_[check(t, 1)]; }

  const std::vector<double>& alpha_bar_table() const { return alpha_bar_; }

  /// CSV with header `t,alpha,alpha_bar,beta,beta_tilde`, rows t = 1..T.
  std::string to_csv() const;

 private:
  std::size_t check(int t, int lowest) const;

  ScheduleSpec spec_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
  std::vector<double> beta_;
  std::vector<double> beta_tilde_;
};

NoiseSchedule build_schedule(const ScheduleSpec& spec);

/// Per-step standard deviation of the generalized sampler, sqrt(eta * beta_tilde_t).
double sigma_t(const NoiseSchedule& sched, int t, double eta);

/// Largest eta for which every step keeps 1 - alpha_bar_{t-1} - sigma_t^2 >= 0.
double max_valid_eta(const NoiseSchedule& sched);

}  // namespace dtl
