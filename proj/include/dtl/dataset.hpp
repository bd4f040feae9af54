#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dtl/tensor.hpp"

namespace dtl {

enum class Light { Left, Center, Right };

std::string to_string(Light light);
Light parse_light(const std::string& text);
Light mirror(Light light);

using AttributeMap = std::map<std::string, int>;

struct DatasetRecord {
  std::string id;
  Sample sample;
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
  Light light = Light::Center;
  AttributeMap attrs;
  bool flipped = false;  // true for mirror-augmented copies

  bool operator==(const DatasetRecord&) const = default;
};

struct LoadResult {
  std::vector<DatasetRecord> records;
  std::size_t dropped = 0;  // ids missing from at least one file
  std::vector<std::string> warnings;
};

struct PoseRow {
  std::string id;
  double yaw, pitch, roll;
};

/// `id,yaw,pitch,roll` rows (optional header). Throws DataError with the line number.
std::vector<PoseRow> load_pose_csv(const std::filesystem::path& path);

/// Joins attribute (`id,attr1,...` with header, values in {-1,1}), pose and
/// light (`id,LEFT|CENTER|RIGHT`) files on id. Records are sorted by id and
/// carry an empty sample; ids listed in `denylist` (one per line) are skipped.
LoadResult load_annotations(const std::filesystem::path& attr_file, const std::filesystem::path& pose_file,
                            const std::filesystem::path& light_file,
                            const std::optional<std::filesystem::path>& denylist = std::nullopt);

/// Writes attributes.csv, pose.csv and light.csv into `dir` (17-digit angles).
void save_annotations(const std::vector<DatasetRecord>& records, const std::filesystem::path& dir);

/// Attaches `<dir>/<id>.dtl` to each record.
void attach_samples(std::vector<DatasetRecord>& records, const std::filesystem::path& dir);

/// Horizontal mirror of an (H, W) or (H, W, C) sample.
Sample mirror_sample(const Sample& s);

/// Mirror augmentation: image mirrored, yaw and roll negated, Left <-> Right.
DatasetRecord flip_record(const DatasetRecord& r);

struct FilterQuery {
  double theta = 0.0;
  double delta0 = 2.0;
  AttributeMap attrs;
  std::optional<Light> light;  // nullopt matches any label
  std::size_t min_count = 1000;
  int max_widenings = 6;
  bool use_flip = true;

  void validate() const;
};

struct FilterResult {
  std::vector<DatasetRecord> records;
  double delta = 0.0;  // final half-window
  int widenings = 0;
  bool shortfall = false;
};

/// Yaw window selection with flip augmentation. The half-window doubles until
/// at least min_count candidates exist (or widenings run out); an over-full
/// window keeps the min_count candidates nearest to theta, ties by
/// (id, flipped).
FilterResult filter_cluster(const std::vector<DatasetRecord>& records, const FilterQuery& q);

struct ClassStats {
  Sample centroid;
  double variance = 0.0;  // mean over pixels of the population variance
  std::size_t count = 0;
};

ClassStats class_stats(const std::vector<DatasetRecord>& cluster);
double centroid_mse(const ClassStats& a, const ClassStats& b);

struct YawHistogram {
  double bin_width = 0.0;
  std::vector<double> lower_edges;
  std::vector<std::size_t> counts;
  std::vector<double> fractions;

  std::string to_csv() const;
};

YawHistogram yaw_histogram(const std::vector<double>& yaws, double bin_width);
YawHistogram yaw_histogram(const std::vector<DatasetRecord>& records, double bin_width);

/// Fraction of yaws with lo <= yaw <= hi.
double fraction_within(const std::vector<double>& yaws, double lo, double hi);

}  // namespace dtl
