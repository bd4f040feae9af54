#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtl/dataset.hpp"
#include "dtl/embedding.hpp"

namespace dtl {

/// Strictly monotone list of yaw angles (degrees), at least two rungs.
struct AngleLadder {
  std::vector<double> thetas;

  void validate() const;
  /// Rungs from `from` to `to` inclusive every `step` degrees.
  static AngleLadder span(double from, double to, double step);
};

/// Least-squares line through latent centroids indexed by yaw.
struct TrajectoryFit {
  Sample base;               // fitted point at reference_theta
  Sample direction;          // unit vector
  double speed = 0.0;        // latent distance per degree along direction
  double reference_theta = 0.0;
  std::vector<double> thetas;
  std::vector<Sample> centroids;
  double residual_rms = 0.0;

  double theta_min() const;
  double theta_max() const;
  /// Latent point the line assigns to `yaw`.
  Sample point_at(double yaw) const;
};

using CentroidMap = std::map<double, Sample>;
using ClusterMap = std::map<double, std::vector<DatasetRecord>>;

/// Embeds every record and averages per rung.
CentroidMap embed_clusters(const ClusterMap& clusters, const EmbedFn& embed_fn);

/// Per-coordinate OLS of centroid value against yaw. The reference angle is the
/// rung closest to 0 (ties: the smaller angle).
TrajectoryFit fit_line(const CentroidMap& centroids);

struct LadderSpec {
  double step = 10.0;
  double extent = 40.0;
  FilterQuery query;  // attrs/light/min_count template; theta is set per rung
};

struct WindowFit {
  TrajectoryFit fit;
  std::vector<FilterResult> clusters;
  bool shortfall = false;
};

/// Filters a cluster at every rung, embeds, and fits.
WindowFit fit_window(const std::vector<DatasetRecord>& records, const AngleLadder& ladder, const FilterQuery& query,
                     const EmbedFn& embed_fn);

struct FitPair {
  WindowFit right;  // rungs over [-extent, 0]
  WindowFit left;   // rungs over [0, +extent]
};

FitPair split_directions(const std::vector<DatasetRecord>& records, const EmbedFn& embed_fn, const LadderSpec& spec);

/// Picks the fit for moving from source to target yaw: the side whose window
/// contains the target; for target 0 the side of the source.
const TrajectoryFit& select_fit(const FitPair& pair, double source_yaw, double target_yaw);

struct TraversalConfig {
  double target_yaw = 0.0;
  int n_steps = 4;
  int max_extra_steps = 2;
  double yaw_tolerance = 2.0;
  double frontalize_threshold = 20.0;

  void validate() const;
};

using GenerateFn = std::function<Sample(const Sample&)>;
/// Measures the yaw of a generated output; throw on failure.
using YawProbeFn = std::function<double(const Sample&)>;

enum class TrailPhase { Frontalize, Rotate };

struct TrailPoint {
  Sample latent;
  Sample output;
  double expected_yaw = 0.0;
  std::optional<double> measured_yaw;
  bool extra = false;
  TrailPhase phase = TrailPhase::Rotate;
};

struct TraversalResult {
  std::vector<TrailPoint> trail;
  bool verified = true;   // false when no probe was available
  bool complete = false;  // final measured yaw within tolerance
  int extra_steps = 0;
};

/// Walks the fitted line from source_yaw to cfg.target_yaw in cfg.n_steps
/// equal steps, probing after each. Undershooting by more than the tolerance
/// at the end triggers up to max_extra_steps more steps of the same size.
/// An empty probe runs open loop and marks the result unverified.
TraversalResult traverse(const TrajectoryFit& fit, const Sample& source_latent, double source_yaw,
                         const TraversalConfig& cfg, const GenerateFn& generate_fn, const YawProbeFn& yaw_probe_fn);

struct FrontalizeResult {
  Sample latent;
  double yaw = 0.0;  // measured (or expected when unverified) yaw of `latent`
  TraversalResult traversal;
  bool applied = false;
};

/// Traverses toward yaw 0 when |source_yaw| exceeds cfg.frontalize_threshold;
/// otherwise returns the source unchanged.
FrontalizeResult frontalize(const FitPair& pair, const Sample& source_latent, double source_yaw,
                            const TraversalConfig& cfg, const GenerateFn& generate_fn, const YawProbeFn& yaw_probe_fn);

/// Frontalization prefix (when needed) followed by the main traversal.
TraversalResult rotate(const FitPair& pair, const Sample& source_latent, double source_yaw, const TraversalConfig& cfg,
                       const GenerateFn& generate_fn, const YawProbeFn& yaw_probe_fn);

using Matrix = std::vector<std::vector<double>>;

/// Cosine similarity of fit directions; symmetric with unit diagonal.
Matrix slope_cosine_matrix(const std::vector<TrajectoryFit>& fits);

std::string matrix_csv(const Matrix& m, const std::vector<std::string>& labels);
/// Grayscale PGM heatmap, similarity [-1, 1] mapped to [0, 255], `cell` pixels per entry.
std::string matrix_heatmap_pgm(const Matrix& m, std::size_t cell = 16);

/// base/direction/centroids as DTL1 plus `<stem>.json` (thetas, residual, speed, extra fields).
void save_fit(const TrajectoryFit& fit, const std::filesystem::path& dir, const std::string& stem,
              const nlohmann::json& extra = nlohmann::json::object());
TrajectoryFit load_fit(const std::filesystem::path& dir, const std::string& stem);

}  // namespace dtl
