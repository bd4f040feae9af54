#pragma once

#include <map>
#include <string>
#include <vector>

#include "dtl/dataset.hpp"
#include "dtl/rng.hpp"

namespace dtl {

/// Synthetic labeled data with known latent structure:
///
///   x = base + max(yaw, 0) u_pos(attrs) + min(yaw, 0) u_neg(attrs)
///         + sum_a attrs[a] shift_a + light_shift + noise_sd * N(0, I)
///
/// where u_pos(attrs) = u_pos + sum_a attrs[a] tilt_a (and likewise for
/// u_neg). With mirror_consistent the planted structure commutes with the
/// record flip, so mirrored records look like genuine ones.
struct PlantedSpec {
  Shape shape{4, 4};
  std::size_t n_records = 10000;   // total, or per rung when rungs are set
  std::vector<double> yaw_rungs;   // empty: yaw uniform in [yaw_min, yaw_max]
  double yaw_jitter = 0.0;         // uniform half-width around each rung
  double yaw_min = -60.0;
  double yaw_max = 60.0;
  double noise_sd = 0.01;
  double speed = 1.0 / 40.0;       // |u| per degree
  bool mirror_consistent = false;
  std::vector<std::string> attr_names;
  std::vector<double> attr_shift;  // |shift_a|, one per attribute
  std::vector<double> attr_tilt;   // |tilt_a| per degree, one per attribute
  double light_shift = 0.0;
  std::uint64_t seed = 0;
};

class PlantedModel {
 public:
  explicit PlantedModel(const PlantedSpec& spec);

  const PlantedSpec& spec() const { return spec_; }
  const Sample& base() const { return base_; }
  const Sample& u_pos() const { return u_pos_; }
  const Sample& u_neg() const { return u_neg_; }
  Sample direction(bool positive_side, const AttributeMap& attrs) const;

  /// Noise-free point for the given labels.
  Sample mean_at(double yaw, const AttributeMap& attrs, Light light) const;
  /// Least-squares yaw of `x` given its labels (piecewise model, best side).
  double estimate_yaw(const Sample& x, const AttributeMap& attrs, Light light) const;

  std::vector<DatasetRecord> generate() const;

 private:
  Sample offset(const AttributeMap& attrs, Light light) const;

  PlantedSpec spec_;
  Sample base_, u_pos_, u_neg_;
  std::vector<Sample> shifts_, tilts_pos_, tilts_neg_;
  Sample light_left_, light_right_;
};

}  // namespace dtl
