#include "dtl/planted.hpp"

#include <cmath>

#include "dtl/error.hpp"

namespace dtl {

namespace {

Sample random_direction(const Shape& shape, double length, RngStream& rng) {
  Sample v = rng.normal_like(shape);
  return scaled(length / norm(v), v);
}

Sample symmetrized(const Sample& s) { return scaled(0.5, lincomb(1.0, s, 1.0, mirror_sample(s))); }

}  // namespace

PlantedModel::PlantedModel(const PlantedSpec& spec) : spec_(spec) {
  if (spec.attr_shift.size() != spec.attr_names.size() || spec.attr_tilt.size() != spec.attr_names.size())
    throw ConfigError("planted: attr_shift and attr_tilt need one entry per attribute");
  if (spec.mirror_consistent && spec.shape.size() < 2)
    throw ConfigError("planted: mirror_consistent needs an image-shaped sample");
  RngStream rng(spec.seed);
  base_ = rng.normal_like(spec.shape);
  for (double& v : base_.values) v = 0.5 + 0.1 * v;
  u_pos_ = random_direction(spec.shape, spec.speed, rng);
  u_neg_ = random_direction(spec.shape, spec.speed, rng);
  for (std::size_t a = 0; a < spec.attr_names.size(); ++a) {
    shifts_.push_back(random_direction(spec.shape, spec.attr_shift[a], rng));
    tilts_pos_.push_back(random_direction(spec.shape, spec.attr_tilt[a], rng));
    tilts_neg_.push_back(random_direction(spec.shape, spec.attr_tilt[a], rng));
  }
  light_left_ = random_direction(spec.shape, spec.light_shift, rng);
  light_right_ = random_direction(spec.shape, spec.light_shift, rng);
  if (spec.mirror_consistent) {
    base_ = symmetrized(base_);
    u_neg_ = scaled(-1.0, mirror_sample(u_pos_));
    for (std::size_t a = 0; a < shifts_.size(); ++a) {
      shifts_[a] = symmetrized(shifts_[a]);
      tilts_neg_[a] = scaled(-1.0, mirror_sample(tilts_pos_[a]));
    }
    light_right_ = mirror_sample(light_left_);
  }
}

Sample PlantedModel::direction(bool positive_side, const AttributeMap& attrs) const {
  Sample u = positive_side ? u_pos_ : u_neg_;
  const auto& tilts = positive_side ? tilts_pos_ : tilts_neg_;
  for (std::size_t a = 0; a < spec_.attr_names.size(); ++a) {
    auto it = attrs.find(spec_.attr_names[a]);
    if (it != attrs.end()) axpy(static_cast<double>(it->second), tilts[a], u);
  }
  return u;
}

Sample PlantedModel::offset(const AttributeMap& attrs, Light light) const {
  Sample out = base_;
  for (std::size_t a = 0; a < spec_.attr_names.size(); ++a) {
    auto it = attrs.find(spec_.attr_names[a]);
    if (it != attrs.end()) axpy(static_cast<double>(it->second), shifts_[a], out);
  }
  if (light == Light::Left) axpy(1.0, light_left_, out);
  if (light == Light::Right) axpy(1.0, light_right_, out);
  return out;
}

Sample PlantedModel::mean_at(double yaw, const AttributeMap& attrs, Light light) const {
  Sample x = offset(attrs, light);
  if (yaw > 0.0) axpy(yaw, direction(true, attrs), x);
  if (yaw < 0.0) axpy(yaw, direction(false, attrs), x);
  return x;
}

double PlantedModel::estimate_yaw(const Sample& x, const AttributeMap& attrs, Light light) const {
  const Sample r = lincomb(1.0, x, -1.0, offset(attrs, light));
  double best_yaw = 0.0, best_err = std::numeric_limits<double>::infinity();
  for (bool positive : {true, false}) {
    const Sample u = direction(positive, attrs);
    double y = dot(r, u) / dot(u, u);
    y = positive ? std::max(y, 0.0) : std::min(y, 0.0);
    const double err = squared_distance(r, scaled(y, u));
    if (err < best_err) {
      best_err = err;
      best_yaw = y;
    }
  }
  return best_yaw;
}

std::vector<DatasetRecord> PlantedModel::generate() const {
  RngStream rng = RngStream(spec_.seed).fork(7);
  std::vector<double> yaws;
  if (spec_.yaw_rungs.empty()) {
    for (std::size_t i = 0; i < spec_.n_records; ++i)
      yaws.push_back(spec_.yaw_min + (spec_.yaw_max - spec_.yaw_min) * rng.uniform());
  } else {
    for (double rung : spec_.yaw_rungs)
      for (std::size_t i = 0; i < spec_.n_records; ++i)
        yaws.push_back(spec_.yaw_jitter > 0.0 ? rung + spec_.yaw_jitter * (2.0 * rng.uniform() - 1.0) : rung);
  }
  std::vector<DatasetRecord> out;
  out.reserve(yaws.size());
  const std::size_t width = std::max<std::size_t>(6, std::to_string(yaws.size()).size());
  for (std::size_t i = 0; i < yaws.size(); ++i) {
    DatasetRecord r;
    r.id = std::to_string(i + 1);
    r.id.insert(0, width - r.id.size(), '0');
    r.yaw = std::clamp(yaws[i], -180.0, 180.0);
    r.pitch = 5.0 * rng.normal();
    r.roll = 3.0 * rng.normal();
    r.light = static_cast<Light>(rng.uniform_int(0, 2));
    for (const auto& name : spec_.attr_names) r.attrs[name] = rng.uniform() < 0.5 ? -1 : 1;
    r.sample = mean_at(r.yaw, r.attrs, r.light);
    for (double& v : r.sample.values) v += spec_.noise_sd * rng.normal();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace dtl
