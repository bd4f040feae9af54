#include "dtl/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dtl/error.hpp"

namespace dtl {

void AngleLadder::validate() const {
  if (thetas.size() < 2) throw ConfigError("angle ladder needs at least two rungs");
  const bool up = thetas[1] > thetas[0];
  for (std::size_t i = 1; i < thetas.size(); ++i)
    if ((thetas[i] > thetas[i - 1]) != up || thetas[i] == thetas[i - 1])
      throw ConfigError("angle ladder must be strictly monotone");
}

AngleLadder AngleLadder::span(double from, double to, double step) {
  if (!(step > 0.0)) throw ConfigError("angle ladder step must be positive");
  AngleLadder ladder;
  const double dir = to >= from ? 1.0 : -1.0;
  const auto n = static_cast<int>(std::floor(std::abs(to - from) / step + 1e-9));
  for (int i = 0; i <= n; ++i) ladder.thetas.push_back(from + dir * step * i);
  ladder.validate();
  return ladder;
}

double TrajectoryFit::theta_min() const { return *std::min_element(thetas.begin(), thetas.end()); }
double TrajectoryFit::theta_max() const { return *std::max_element(thetas.begin(), thetas.end()); }

Sample TrajectoryFit::point_at(double yaw) const {
  Sample p = base;
  axpy((yaw - reference_theta) * speed, direction, p);
  return p;
}

CentroidMap embed_clusters(const ClusterMap& clusters, const EmbedFn& embed_fn) {
  CentroidMap out;
  for (const auto& [theta, cluster] : clusters) {
    if (cluster.empty())
      throw DataError("embed_clusters: empty cluster at yaw " + format_double(theta));
    std::vector<Sample> latents;
    latents.reserve(cluster.size());
    for (const auto& r : cluster) latents.push_back(embed_fn(r.sample));
    for (const auto& z : latents) require_same_shape(latents.front(), z, "embed_clusters");
    out.emplace(theta, mean_of(latents));
  }
  return out;
}

TrajectoryFit fit_line(const CentroidMap& centroids) {
  if (centroids.size() < 2) throw std::invalid_argument("fit_line: need at least two distinct angles");
  TrajectoryFit fit;
  for (const auto& [theta, c] : centroids) {
    require_same_shape(centroids.begin()->second, c, "fit_line");
    fit.thetas.push_back(theta);
    fit.centroids.push_back(c);
  }
  const auto n = static_cast<double>(fit.thetas.size());
  double theta_mean = 0.0;
  for (double t : fit.thetas) theta_mean += t;
  theta_mean /= n;
  double sxx = 0.0;
  for (double t : fit.thetas) sxx += (t - theta_mean) * (t - theta_mean);

  const Sample mean = mean_of(fit.centroids);
  Sample slope(mean.shape, 0.0);
  for (std::size_t i = 0; i < fit.thetas.size(); ++i)
    for (std::size_t j = 0; j < slope.size(); ++j) slope[j] += (fit.thetas[i] - theta_mean) * (fit.centroids[i][j] - mean[j]);
  for (double& s : slope.values) s /= sxx;

  const double speed = norm(slope);
  const double span = fit.thetas.back() - fit.thetas.front();
  if (!(speed * span > 1e-12 * (1.0 + norm(mean))))
    throw NumericalError("fit_line: degenerate fit, centroids do not move with yaw");

  fit.reference_theta = *std::min_element(fit.thetas.begin(), fit.thetas.end(), [](double a, double b) {
    return std::abs(a) != std::abs(b) ? std::abs(a) < std::abs(b) : a < b;
  });
  fit.speed = speed;
  fit.direction = scaled(1.0 / speed, slope);
  fit.base = mean;
  axpy(fit.reference_theta - theta_mean, slope, fit.base);

  double ss = 0.0;
  for (std::size_t i = 0; i < fit.thetas.size(); ++i)
    for (std::size_t j = 0; j < slope.size(); ++j) {
      const double r = mean[j] + (fit.thetas[i] - theta_mean) * slope[j] - fit.centroids[i][j];
      ss += r * r;
    }
  fit.residual_rms = std::sqrt(ss / (n * static_cast<double>(slope.size())));
  return fit;
}

WindowFit fit_window(const std::vector<DatasetRecord>& records, const AngleLadder& ladder, const FilterQuery& query,
                     const EmbedFn& embed_fn) {
  ladder.validate();
  WindowFit out;
  ClusterMap clusters;
  for (double theta : ladder.thetas) {
    FilterQuery q = query;
    q.theta = theta;
    FilterResult r = filter_cluster(records, q);
    out.shortfall = out.shortfall || r.shortfall;
    if (r.records.empty()) throw DataError("no records match the query near yaw " + format_double(theta));
    clusters[theta] = r.records;
    out.clusters.push_back(std::move(r));
  }
  out.fit = fit_line(embed_clusters(clusters, embed_fn));
  return out;
}

FitPair split_directions(const std::vector<DatasetRecord>& records, const EmbedFn& embed_fn, const LadderSpec& spec) {
  FitPair pair;
  pair.right = fit_window(records, AngleLadder::span(0.0, -spec.extent, spec.step), spec.query, embed_fn);
  pair.left = fit_window(records, AngleLadder::span(0.0, spec.extent, spec.step), spec.query, embed_fn);
  return pair;
}

const TrajectoryFit& select_fit(const FitPair& pair, double source_yaw, double target_yaw) {
  if (target_yaw < 0.0) return pair.right.fit;
  if (target_yaw > 0.0) return pair.left.fit;
  if (source_yaw < 0.0) return pair.right.fit;
  if (source_yaw > 0.0) return pair.left.fit;
  // Both at 0: no motion, either line works.
  return pair.left.fit;
}

void TraversalConfig::validate() const {
  if (n_steps < 1) throw ConfigError("traversal: n_steps must be >= 1");
  if (max_extra_steps < 0) throw ConfigError("traversal: max_extra_steps must be >= 0");
  if (!(yaw_tolerance > 0.0)) throw ConfigError("traversal: yaw_tolerance must be positive");
}

TraversalResult traverse(const TrajectoryFit& fit, const Sample& source_latent, double source_yaw,
                         const TraversalConfig& cfg, const GenerateFn& generate_fn, const YawProbeFn& yaw_probe_fn) {
  cfg.validate();
  require_same_shape(fit.direction, source_latent, "traverse");
  const double side = fit.theta_min() + fit.theta_max();
  if (side != 0.0 && side * source_yaw < 0.0 && side * cfg.target_yaw < 0.0)
    throw std::invalid_argument("traverse: source and target yaw both lie on the other side of this fit");

  TraversalResult result;
  result.verified = static_cast<bool>(yaw_probe_fn);
  const double total = cfg.target_yaw - source_yaw;
  // No motion requested: a single frame.
  const int steps = total == 0.0 ? 1 : cfg.n_steps;
  const double dyaw = total / steps;
  Sample latent = source_latent;

  auto take_step = [&](int k, bool extra) {
    axpy(dyaw * fit.speed, fit.direction, latent);
    if (!latent.all_finite()) throw NumericalError("traverse: non-finite latent at step " + std::to_string(k));
    TrailPoint p;
    p.latent = latent;
    p.output = generate_fn(latent);
    p.expected_yaw = source_yaw + k * dyaw;
    if (yaw_probe_fn) p.measured_yaw = yaw_probe_fn(p.output);
    p.extra = extra;
    result.trail.push_back(std::move(p));
  };

  for (int k = 1; k <= steps; ++k) take_step(k, false);
  if (!result.verified) return result;

  // Remaining distance to the target, measured along the direction of motion.
  auto shortfall = [&] {
    const double measured = *result.trail.back().measured_yaw;
    return total >= 0.0 ? cfg.target_yaw - measured : measured - cfg.target_yaw;
  };
  while (dyaw != 0.0 && shortfall() > cfg.yaw_tolerance && result.extra_steps < cfg.max_extra_steps) {
    ++result.extra_steps;
    take_step(steps + result.extra_steps, true);
  }
  result.complete = std::abs(*result.trail.back().measured_yaw - cfg.target_yaw) <= cfg.yaw_tolerance;
  return result;
}

FrontalizeResult frontalize(const FitPair& pair, const Sample& source_latent, double source_yaw,
                            const TraversalConfig& cfg, const GenerateFn& generate_fn, const YawProbeFn& yaw_probe_fn) {
  FrontalizeResult out;
  out.latent = source_latent;
  out.yaw = source_yaw;
  if (std::abs(source_yaw) <= cfg.frontalize_threshold) return out;
  TraversalConfig to_front = cfg;
  to_front.target_yaw = 0.0;
  out.traversal = traverse(select_fit(pair, source_yaw, 0.0), source_latent, source_yaw, to_front, generate_fn,
                           yaw_probe_fn);
  for (auto& p : out.traversal.trail) p.phase = TrailPhase::Frontalize;
  const auto& last = out.traversal.trail.back();
  out.latent = last.latent;
  out.yaw = last.measured_yaw.value_or(last.expected_yaw);
  out.applied = true;
  return out;
}

TraversalResult rotate(const FitPair& pair, const Sample& source_latent, double source_yaw, const TraversalConfig& cfg,
                       const GenerateFn& generate_fn, const YawProbeFn& yaw_probe_fn) {
  FrontalizeResult front = frontalize(pair, source_latent, source_yaw, cfg, generate_fn, yaw_probe_fn);
  TraversalResult main = traverse(select_fit(pair, front.yaw, cfg.target_yaw), front.latent, front.yaw, cfg,
                                  generate_fn, yaw_probe_fn);
  if (!front.applied) return main;
  TraversalResult out = std::move(front.traversal);
  out.trail.insert(out.trail.end(), std::make_move_iterator(main.trail.begin()),
                   std::make_move_iterator(main.trail.end()));
  out.verified = out.verified && main.verified;
  out.complete = main.complete;
  out.extra_steps += main.extra_steps;
  return out;
}

Matrix slope_cosine_matrix(const std::vector<TrajectoryFit>& fits) {
  if (fits.empty()) throw std::invalid_argument("slope_cosine_matrix: no fits");
  const std::size_t n = fits.size();
  Matrix m(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    require_same_shape(fits.front().direction, fits[i].direction, "slope_cosine_matrix");
    if (norm(fits[i].direction) == 0.0) throw std::invalid_argument("slope_cosine_matrix: zero direction");
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m[i][j] = m[j][i] = std::clamp(cosine(fits[i].direction, fits[j].direction), -1.0, 1.0);
  return m;
}

std::string matrix_csv(const Matrix& m, const std::vector<std::string>& labels) {
  if (labels.size() != m.size()) throw std::invalid_argument("matrix_csv: label count mismatch");
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  std::ostringstream out;
  out << "label";
  for (const auto& l : labels) out << ',' << quote(l);
  out << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << quote(labels[i]);
    for (double v : m[i]) out << ',' << format_double(v);
    out << '\n';
  }
  return out.str();
}

std::string matrix_heatmap_pgm(const Matrix& m, std::size_t cell) {
  const std::size_t n = m.size() * cell;
  std::string out = "P5\n" + std::to_string(n) + " " + std::to_string(n) + "\n255\n";
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const double v = std::clamp(m[y / cell][x / cell], -1.0, 1.0);
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::floor((v + 1.0) * 127.5 + 0.5))));
    }
  return out;
}

void save_fit(const TrajectoryFit& fit, const std::filesystem::path& dir, const std::string& stem,
              const nlohmann::json& extra) {
  write_dtl(dir / (stem + ".base.dtl"), fit.base);
  write_dtl(dir / (stem + ".direction.dtl"), fit.direction);
  write_dtl(dir / (stem + ".centroids.dtl"), stack(fit.centroids));
  nlohmann::json j = extra;
  j["thetas"] = fit.thetas;
  j["residual_rms"] = fit.residual_rms;
  j["speed"] = fit.speed;
  j["reference_theta"] = fit.reference_theta;
  write_file_atomic(dir / (stem + ".json"), j.dump(2) + "\n");
}

TrajectoryFit load_fit(const std::filesystem::path& dir, const std::string& stem) {
  const auto j = nlohmann::json::parse(read_file(dir / (stem + ".json")));
  TrajectoryFit fit;
  fit.base = read_dtl(dir / (stem + ".base.dtl"));
  fit.direction = read_dtl(dir / (stem + ".direction.dtl"));
  fit.centroids = unstack(read_dtl(dir / (stem + ".centroids.dtl")));
  for (auto& c : fit.centroids) c.shape = fit.base.shape;
  fit.thetas = j.at("thetas").get<std::vector<double>>();
  fit.residual_rms = j.at("residual_rms").get<double>();
  fit.speed = j.at("speed").get<double>();
  fit.reference_theta = j.at("reference_theta").get<double>();
  return fit;
}

}  // namespace dtl
