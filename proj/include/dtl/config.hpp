#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtl/dataset.hpp"
#include "dtl/denoiser.hpp"
#include "dtl/planted.hpp"
#include "dtl/schedule.hpp"
#include "dtl/trajectory.hpp"

namespace dtl {

/// Where records (or toy samples) come from. Exactly one source is active.
struct DatasetConfig {
  std::optional<GaussianMixture> mixture;
  std::optional<PlantedSpec> planted;
  std::optional<std::filesystem::path> attributes, pose, light, samples, denylist;
};

struct ModelConfig {
  std::string kind = "analytic";  // analytic | mlp
  std::optional<std::filesystem::path> dir;
  std::optional<std::filesystem::path> embedder_dir;
  std::size_t time_features = 16;
  std::size_t hidden = 128;
};

struct EmbedderTrainConfig {
  int n_pairs = 10000;
  TrainConfig train;
  std::size_t hidden = 128;
};

struct TrajectoryConfig {
  LadderSpec ladder;
  TraversalConfig traversal;
  std::vector<std::string> match_attrs;  // copied from the source record into the query
  bool match_light = false;
  std::string embed = "identity";  // identity | ode | net
  std::vector<std::pair<double, double>> windows{{0.0, 40.0}};
};

/// Parsed and validated run configuration. `resolved` is the normalized JSON
/// (defaults filled in, overrides applied) that the config hash is taken of.
struct RunConfig {
  ScheduleSpec schedule;
  ModelConfig model;
  TrainConfig train;
  EmbedderTrainConfig embedder;
  DatasetConfig dataset;
  TrajectoryConfig trajectory;
  std::uint64_t seed = 0;
  nlohmann::json resolved;

  std::string hash() const;
};

/// Applies `a.b.c=value` overrides; the value is parsed as JSON when possible,
/// otherwise taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Validates keys and types, fills defaults, checks that referenced paths exist.
/// Relative paths resolve against `base_dir`. Throws ConfigError.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

/// Reads a config file (or an empty document when `path` is empty), applies
/// overrides, then DTL_SEED, then an explicit seed.
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {},
                      std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace dtl
