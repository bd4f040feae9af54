#include "dtl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "dtl/error.hpp"

namespace dtl {

std::string to_string(Light light) {
  switch (light) {
    case Light::Left: return "LEFT";
    case Light::Center: return "CENTER";
    case Light::Right: return "RIGHT";
  }
  return "?";
}

Light parse_light(const std::string& text) {
  std::string up = text;
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (up == "LEFT") return Light::Left;
  if (up == "CENTER") return Light::Center;
  if (up == "RIGHT") return Light::Right;
  throw DataError("unknown light label '" + text + "'");
}

Light mirror(Light light) {
  if (light == Light::Left) return Light::Right;
  if (light == Light::Right) return Light::Left;
  return light;
}

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct CsvLine {
  std::size_t number;
  std::vector<std::string> fields;
};

std::vector<CsvLine> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<CsvLine> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    rows.push_back({n, split_csv(line)});
  }
  return rows;
}

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line, const std::string& msg) {
  throw DataError(path.string() + ":" + std::to_string(line) + ": " + msg);
}

double parse_number(const std::filesystem::path& path, std::size_t line, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) fail(path, line, "not a number: '" + text + "'");
  return v;
}

bool is_header(const CsvLine& row) {
  if (row.fields.empty()) return false;
  std::string first = row.fields.front();
  std::transform(first.begin(), first.end(), first.begin(), [](unsigned char c) { return std::tolower(c); });
  return first == "id";
}

}  // namespace

std::vector<PoseRow> load_pose_csv(const std::filesystem::path& path) {
  std::vector<PoseRow> out;
  const auto rows = read_csv(path);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (i == 0 && is_header(row)) continue;
    if (row.fields.size() != 4) fail(path, row.number, "expected 4 columns (id,yaw,pitch,roll)");
    PoseRow p{row.fields[0], parse_number(path, row.number, row.fields[1]), parse_number(path, row.number, row.fields[2]),
              parse_number(path, row.number, row.fields[3])};
    if (p.yaw < -180.0 || p.yaw > 180.0) fail(path, row.number, "yaw outside [-180, 180]");
    out.push_back(std::move(p));
  }
  return out;
}

LoadResult load_annotations(const std::filesystem::path& attr_file, const std::filesystem::path& pose_file,
                            const std::filesystem::path& light_file,
                            const std::optional<std::filesystem::path>& denylist) {
  std::set<std::string> denied;
  if (denylist) {
    for (const auto& row : read_csv(*denylist))
      if (!row.fields.empty()) denied.insert(row.fields.front());
  }

  std::unordered_map<std::string, AttributeMap> attrs;
  {
    const auto rows = read_csv(attr_file);
    if (rows.empty() || !is_header(rows.front())) fail(attr_file, 1, "missing header row `id,attr1,...`");
    const auto& names = rows.front().fields;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& row = rows[i];
      if (row.fields.size() != names.size())
        fail(attr_file, row.number,
             "expected " + std::to_string(names.size()) + " columns, got " + std::to_string(row.fields.size()));
      AttributeMap m;
      for (std::size_t c = 1; c < names.size(); ++c) {
        const auto& v = row.fields[c];
        if (v == "1" || v == "+1") m[names[c]] = 1;
        else if (v == "-1") m[names[c]] = -1;
        else fail(attr_file, row.number, "attribute " + names[c] + " must be -1 or 1, got '" + v + "'");
      }
      attrs[row.fields[0]] = std::move(m);
    }
  }

  std::unordered_map<std::string, PoseRow> poses;
  for (auto& p : load_pose_csv(pose_file)) poses[p.id] = p;

  std::unordered_map<std::string, Light> lights;
  {
    const auto rows = read_csv(light_file);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& row = rows[i];
      if (i == 0 && is_header(row)) continue;
      if (row.fields.size() != 2) fail(light_file, row.number, "expected 2 columns (id,LIGHT)");
      try {
        lights[row.fields[0]] = parse_light(row.fields[1]);
      } catch (const DataError& e) {
        fail(light_file, row.number, e.what());
      }
    }
  }

  LoadResult result;
  std::set<std::string> all_ids;
  for (const auto& [id, _] : attrs) all_ids.insert(id);
  for (const auto& [id, _] : poses) all_ids.insert(id);
  for (const auto& [id, _] : lights) all_ids.insert(id);
  for (const auto& id : all_ids) {
    if (denied.count(id)) continue;
    auto a = attrs.find(id);
    auto p = poses.find(id);
    auto l = lights.find(id);
    if (a == attrs.end() || p == poses.end() || l == lights.end()) {
      ++result.dropped;
      continue;
    }
    DatasetRecord r;
    r.id = id;
    r.yaw = p->second.yaw;
    r.pitch = p->second.pitch;
    r.roll = p->second.roll;
    r.light = l->second;
    r.attrs = a->second;
    result.records.push_back(std::move(r));
  }
  if (result.dropped > 0)
    result.warnings.push_back(std::to_string(result.dropped) + " ids missing from at least one annotation file");
  if (result.records.empty()) result.warnings.push_back("no id is present in all three annotation files");
  return result;
}

void save_annotations(const std::vector<DatasetRecord>& records, const std::filesystem::path& dir) {
  std::set<std::string> names;
  for (const auto& r : records)
    for (const auto& [k, _] : r.attrs) names.insert(k);
  std::ostringstream attr, pose, light;
  attr << "id";
  for (const auto& n : names) attr << ',' << n;
  attr << '\n';
  pose << "id,yaw,pitch,roll\n";
  light << "id,light\n";
  for (const auto& r : records) {
    attr << r.id;
    for (const auto& n : names) {
      auto it = r.attrs.find(n);
      if (it == r.attrs.end()) throw DataError("record " + r.id + " lacks attribute " + n);
      attr << ',' << it->second;
    }
    attr << '\n';
    pose << r.id << ',' << format_double(r.yaw) << ',' << format_double(r.pitch) << ',' << format_double(r.roll) << '\n';
    light << r.id << ',' << to_string(r.light) << '\n';
  }
  write_file_atomic(dir / "attributes.csv", attr.str());
  write_file_atomic(dir / "pose.csv", pose.str());
  write_file_atomic(dir / "light.csv", light.str());
}

void attach_samples(std::vector<DatasetRecord>& records, const std::filesystem::path& dir) {
  for (auto& r : records) {
    const auto path = dir / (r.id + ".dtl");
    if (!std::filesystem::exists(path)) throw DataError("sample file not found: " + path.string());
    r.sample = read_dtl(path);
  }
}

Sample mirror_sample(const Sample& s) {
  if (s.shape.size() != 2 && s.shape.size() != 3)
    throw std::invalid_argument("mirror_sample: expected (H, W) or (H, W, C) sample, got " + shape_to_string(s.shape));
  const std::size_t H = s.shape[0], W = s.shape[1], C = s.shape.size() == 3 ? s.shape[2] : 1;
  Sample out = s;
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t c = 0; c < C; ++c) out[(y * W + x) * C + c] = s[(y * W + (W - 1 - x)) * C + c];
  return out;
}

DatasetRecord flip_record(const DatasetRecord& r) {
  DatasetRecord f = r;
  if (!r.sample.values.empty()) f.sample = mirror_sample(r.sample);
  f.yaw = -r.yaw;
  f.roll = -r.roll;
  f.light = mirror(r.light);
  f.flipped = !r.flipped;
  return f;
}

void FilterQuery::validate() const {
  if (!(delta0 > 0.0)) throw ConfigError("filter: delta0 must be positive");
  if (min_count < 1) throw ConfigError("filter: min_count must be >= 1");
  if (max_widenings < 0) throw ConfigError("filter: max_widenings must be >= 0");
}

namespace {

bool matches(const FilterQuery& q, Light light, const AttributeMap& attrs) {
  if (q.light && *q.light != light) return false;
  for (const auto& [name, value] : q.attrs) {
    auto it = attrs.find(name);
    if (it == attrs.end() || it->second != value) return false;
  }
  return true;
}

struct Candidate {
  const DatasetRecord* source;
  bool flip;
  double yaw;

  bool flipped_state() const { return flip != source->flipped; }
};

}  // namespace

FilterResult filter_cluster(const std::vector<DatasetRecord>& records, const FilterQuery& q) {
  q.validate();
  std::vector<Candidate> pool;
  for (const auto& r : records) {
    if (matches(q, r.light, r.attrs)) pool.push_back({&r, false, r.yaw});
    if (q.use_flip && matches(q, mirror(r.light), r.attrs)) pool.push_back({&r, true, -r.yaw});
  }
  auto key = [&q](const Candidate& c) { return std::abs(c.yaw - q.theta); };
  std::sort(pool.begin(), pool.end(), [&](const Candidate& a, const Candidate& b) {
    const double ka = key(a), kb = key(b);
    if (ka != kb) return ka < kb;
    if (a.source->id != b.source->id) return a.source->id < b.source->id;
    return !a.flipped_state() && b.flipped_state();
  });

  FilterResult result;
  result.delta = q.delta0;
  auto in_window = [&](double delta) {
    return static_cast<std::size_t>(std::upper_bound(pool.begin(), pool.end(), delta,
                                                     [&](double d, const Candidate& c) { return d < key(c); }) -
                                    pool.begin());
  };
  std::size_t count = in_window(result.delta);
  while (count < q.min_count && result.widenings < q.max_widenings) {
    result.delta *= 2.0;
    ++result.widenings;
    count = in_window(result.delta);
  }
  result.shortfall = count < q.min_count;
  const std::size_t keep = std::min(count, q.min_count);
  result.records.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i)
    result.records.push_back(pool[i].flip ? flip_record(*pool[i].source) : *pool[i].source);
  return result;
}

ClassStats class_stats(const std::vector<DatasetRecord>& cluster) {
  if (cluster.empty()) throw std::invalid_argument("class_stats: empty cluster");
  const Shape& shape = cluster.front().sample.shape;
  Sample sum(shape, 0.0), sum_sq(shape, 0.0);
  for (const auto& r : cluster) {
    require_same_shape(cluster.front().sample, r.sample, "class_stats");
    for (std::size_t j = 0; j < sum.size(); ++j) {
      sum[j] += r.sample[j];
      sum_sq[j] += r.sample[j] * r.sample[j];
    }
  }
  const auto n = static_cast<double>(cluster.size());
  ClassStats stats;
  stats.count = cluster.size();
  stats.centroid = scaled(1.0 / n, sum);
  // Two-pass variance for accuracy.
  double var = 0.0;
  for (std::size_t j = 0; j < sum.size(); ++j) {
    double acc = 0.0;
    for (const auto& r : cluster) {
      const double d = r.sample[j] - stats.centroid[j];
      acc += d * d;
    }
    var += acc / n;
  }
  stats.variance = var / static_cast<double>(sum.size());
  return stats;
}

double centroid_mse(const ClassStats& a, const ClassStats& b) { return mse(a.centroid, b.centroid); }

YawHistogram yaw_histogram(const std::vector<double>& yaws, double bin_width) {
  if (!(bin_width > 0.0)) throw std::invalid_argument("yaw_histogram: bin width must be positive");
  if (yaws.empty()) throw std::invalid_argument("yaw_histogram: no records");
  std::map<long long, std::size_t> bins;
  for (double y : yaws) ++bins[static_cast<long long>(std::floor(y / bin_width))];
  YawHistogram h;
  h.bin_width = bin_width;
  const auto n = static_cast<double>(yaws.size());
  for (const auto& [k, c] : bins) {
    h.lower_edges.push_back(static_cast<double>(k) * bin_width);
    h.counts.push_back(c);
    h.fractions.push_back(static_cast<double>(c) / n);
  }
  return h;
}

YawHistogram yaw_histogram(const std::vector<DatasetRecord>& records, double bin_width) {
  std::vector<double> yaws;
  yaws.reserve(records.size());
  for (const auto& r : records) yaws.push_back(r.yaw);
  return yaw_histogram(yaws, bin_width);
}

std::string YawHistogram::to_csv() const {
  std::ostringstream out;
  out << "bin_lo,bin_hi,count,fraction\n";
  for (std::size_t i = 0; i < counts.size(); ++i)
    out << format_double(lower_edges[i]) << ',' << format_double(lower_edges[i] + bin_width) << ',' << counts[i] << ','
        << format_double(fractions[i]) << '\n';
  return out.str();
}

double fraction_within(const std::vector<double>& yaws, double lo, double hi) {
  if (yaws.empty()) throw std::invalid_argument("fraction_within: no yaws");
  const auto n = std::count_if(yaws.begin(), yaws.end(), [&](double y) { return y >= lo && y <= hi; });
  return static_cast<double>(n) / static_cast<double>(yaws.size());
}

}  // namespace dtl
