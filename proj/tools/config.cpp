#include "dtl/config.hpp"

#include <cstdlib>
#include <set>

#include "dtl/error.hpp"

namespace dtl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Typed access to one JSON object that remembers which keys were read, so
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (doc.is_null()) return;
    if (!doc.is_object()) throw ConfigError("config: '" + name_ + "' must be an object");
    doc_ = &doc;
  }

  bool has(const std::string& key) {
    allowed_.insert(key);
    return doc_ && doc_->contains(key);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    try {
      return doc_->at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: '" + path(key) + "' has the wrong type");
    }
  }

  const json& raw(const std::string& key) {
    allowed_.insert(key);
    return doc_->at(key);
  }

  std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  void finish() const {
    if (!doc_) return;
    for (const auto& [key, _] : doc_->items())
      if (!allowed_.count(key)) throw ConfigError("config: unknown key '" + path(key) + "'");
  }

 private:
  const json* doc_ = nullptr;
  std::string name_;
  std::set<std::string> allowed_;
};

const json& sub(const json& doc, const std::string& key) {
  static const json null_doc;
  return doc.contains(key) ? doc.at(key) : null_doc;
}

fs::path existing_path(Section& s, const std::string& key, const fs::path& base) {
  fs::path p = s.get<std::string>(key, "");
  if (p.empty()) throw ConfigError("config: '" + s.path(key) + "' must be a non-empty path");
  if (p.is_relative() && !base.empty()) p = base / p;
  if (!fs::exists(p)) throw ConfigError("config: path for '" + s.path(key) + "' does not exist: " + p.string());
  return p;
}

GaussianMixture parse_mixture(const json& doc) {
  Section s(doc, "dataset.mixture");
  GaussianMixture mix;
  const std::string preset = s.get<std::string>("preset", "");
  if (preset == "eight_gaussians") {
    mix = eight_gaussians(s.get<double>("radius", 5.0), s.get<double>("std", 0.1));
  } else if (preset.empty()) {
    mix.weights = s.get<std::vector<double>>("weights", {});
    for (const auto& m : s.get<std::vector<std::vector<double>>>("means", {})) mix.means.push_back(Sample::vector(m));
    mix.variances = s.get<std::vector<double>>("variances", {});
  } else {
    throw ConfigError("config: unknown mixture preset '" + preset + "'");
  }
  s.finish();
  mix.validate();
  return mix;
}

PlantedSpec parse_planted(const json& doc) {
  Section s(doc, "dataset.planted");
  PlantedSpec p;
  p.shape = s.get<std::vector<std::size_t>>("shape", p.shape);
  p.n_records = s.get<std::size_t>("n_records", p.n_records);
  p.yaw_rungs = s.get<std::vector<double>>("yaw_rungs", p.yaw_rungs);
  p.yaw_jitter = s.get<double>("yaw_jitter", p.yaw_jitter);
  p.yaw_min = s.get<double>("yaw_min", p.yaw_min);
  p.yaw_max = s.get<double>("yaw_max", p.yaw_max);
  p.noise_sd = s.get<double>("noise_sd", p.noise_sd);
  p.speed = s.get<double>("speed", p.speed);
  p.mirror_consistent = s.get<bool>("mirror_consistent", p.mirror_consistent);
  p.light_shift = s.get<double>("light_shift", p.light_shift);
  p.seed = s.get<std::uint64_t>("seed", p.seed);
  if (s.has("attributes")) {
    const json& attrs = s.raw("attributes");
    if (!attrs.is_array()) throw ConfigError("config: 'dataset.planted.attributes' must be an array");
    for (const auto& a : attrs) {
      Section as(a, "dataset.planted.attributes[]");
      p.attr_names.push_back(as.get<std::string>("name", ""));
      p.attr_shift.push_back(as.get<double>("shift", 0.0));
      p.attr_tilt.push_back(as.get<double>("tilt", 0.0));
      as.finish();
      if (p.attr_names.back().empty()) throw ConfigError("config: planted attribute without a name");
    }
  }
  s.finish();
  if (p.shape.empty() || p.n_records == 0 || !(p.noise_sd >= 0.0) || !(p.yaw_max > p.yaw_min))
    throw ConfigError("config: invalid dataset.planted parameters");
  return p;
}

void parse_train(Section& s, TrainConfig& t) {
  t.batch_size = s.get<int>("batch_size", t.batch_size);
  t.n_steps = s.get<int>("n_steps", t.n_steps);
  t.learning_rate = s.get<double>("learning_rate", t.learning_rate);
}

}  // namespace

std::string RunConfig::hash() const { return fnv1a_hex(resolved.dump()); }

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value: " + assignment);
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override has an empty key component: " + assignment);
    if (!node->is_object()) *node = json::object();
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = std::move(value);
}

RunConfig parse_config(const json& doc, const fs::path& base) {
  if (!doc.is_object()) throw ConfigError("config: top level must be a JSON object");
  RunConfig cfg;
  cfg.resolved = doc;
  Section top(doc, "");
  cfg.seed = top.get<std::uint64_t>("seed", 0);

  top.has("schedule");
  {
    Section s(sub(doc, "schedule"), "schedule");
    cfg.schedule.kind = parse_schedule_kind(s.get<std::string>("kind", to_string(cfg.schedule.kind)));
    cfg.schedule.steps = s.get<int>("steps", cfg.schedule.steps);
    cfg.schedule.beta_start = s.get<double>("beta_start", cfg.schedule.beta_start);
    cfg.schedule.beta_end = s.get<double>("beta_end", cfg.schedule.beta_end);
    cfg.schedule.cosine_offset = s.get<double>("cosine_offset", cfg.schedule.cosine_offset);
    s.finish();
    cfg.schedule.validate();
  }

  top.has("dataset");
  {
    Section s(sub(doc, "dataset"), "dataset");
    if (s.has("mixture")) cfg.dataset.mixture = parse_mixture(s.raw("mixture"));
    if (s.has("planted")) cfg.dataset.planted = parse_planted(s.raw("planted"));
    for (auto [key, slot] : {std::pair{"attributes", &cfg.dataset.attributes}, std::pair{"pose", &cfg.dataset.pose},
                             std::pair{"light", &cfg.dataset.light}, std::pair{"samples", &cfg.dataset.samples},
                             std::pair{"denylist", &cfg.dataset.denylist}})
      if (s.has(key)) *slot = existing_path(s, key, base);
    s.finish();
    const bool files = cfg.dataset.attributes || cfg.dataset.light;
    if (files && !(cfg.dataset.attributes && cfg.dataset.pose && cfg.dataset.light))
      throw ConfigError("config: dataset needs attributes, pose and light files together");
    if ((cfg.dataset.mixture ? 1 : 0) + (cfg.dataset.planted ? 1 : 0) + (files ? 1 : 0) > 1)
      throw ConfigError("config: dataset must use exactly one of mixture, planted or annotation files");
  }

  top.has("model");
  {
    Section s(sub(doc, "model"), "model");
    cfg.model.kind = s.get<std::string>("kind", cfg.model.kind);
    if (cfg.model.kind != "analytic" && cfg.model.kind != "mlp")
      throw ConfigError("config: model.kind must be 'analytic' or 'mlp'");
    if (s.has("dir")) cfg.model.dir = existing_path(s, "dir", base);
    if (s.has("embedder_dir")) cfg.model.embedder_dir = existing_path(s, "embedder_dir", base);
    cfg.model.time_features = s.get<std::size_t>("time_features", cfg.model.time_features);
    cfg.model.hidden = s.get<std::size_t>("hidden", cfg.model.hidden);
    s.finish();
  }

  top.has("train");
  {
    Section s(sub(doc, "train"), "train");
    parse_train(s, cfg.train);
    cfg.embedder.train = cfg.train;
    if (s.has("embedder")) {
      Section e(s.raw("embedder"), "train.embedder");
      parse_train(e, cfg.embedder.train);
      cfg.embedder.n_pairs = e.get<int>("n_pairs", cfg.embedder.n_pairs);
      cfg.embedder.hidden = e.get<std::size_t>("hidden", cfg.embedder.hidden);
      e.finish();
    }
    s.finish();
    cfg.train.seed = cfg.embedder.train.seed = cfg.seed;
    cfg.train.validate();
    cfg.embedder.train.validate();
  }

  top.has("trajectory");
  {
    Section s(sub(doc, "trajectory"), "trajectory");
    auto& t = cfg.trajectory;
    t.ladder.step = s.get<double>("step", t.ladder.step);
    t.ladder.extent = s.get<double>("extent", t.ladder.extent);
    auto& q = t.ladder.query;
    q.delta0 = s.get<double>("delta0", q.delta0);
    q.min_count = s.get<std::size_t>("min_count", q.min_count);
    q.max_widenings = s.get<int>("max_widenings", q.max_widenings);
    q.use_flip = s.get<bool>("use_flip", q.use_flip);
    q.attrs = s.get<AttributeMap>("attrs", q.attrs);
    for (const auto& [name, v] : q.attrs)
      if (v != 1 && v != -1) throw ConfigError("config: trajectory.attrs." + name + " must be -1 or 1");
    if (s.has("light")) q.light = parse_light(s.get<std::string>("light", ""));
    t.match_attrs = s.get<std::vector<std::string>>("match_attrs", t.match_attrs);
    t.match_light = s.get<bool>("match_light", t.match_light);
    t.traversal.n_steps = s.get<int>("n_steps", t.traversal.n_steps);
    t.traversal.max_extra_steps = s.get<int>("max_extra_steps", t.traversal.max_extra_steps);
    t.traversal.yaw_tolerance = s.get<double>("yaw_tolerance", t.traversal.yaw_tolerance);
    t.traversal.frontalize_threshold = s.get<double>("frontalize_threshold", t.traversal.frontalize_threshold);
    t.embed = s.get<std::string>("embed", t.embed);
    if (t.embed != "identity" && t.embed != "ode" && t.embed != "net")
      throw ConfigError("config: trajectory.embed must be identity, ode or net");
    if (s.has("windows")) {
      t.windows.clear();
      for (const auto& w : s.get<std::vector<std::vector<double>>>("windows", {})) {
        if (w.size() != 2 || !(w[0] < w[1])) throw ConfigError("config: each trajectory window must be [lo, hi]");
        t.windows.emplace_back(w[0], w[1]);
      }
    }
    s.finish();
    if (!(t.ladder.step > 0.0) || !(t.ladder.extent > 0.0))
      throw ConfigError("config: trajectory step and extent must be positive");
    q.validate();
    t.traversal.validate();
  }

  top.finish();
  return cfg;
}

RunConfig load_config(const fs::path& path, const std::vector<std::string>& overrides,
                      std::optional<std::uint64_t> seed) {
  json doc = json::object();
  fs::path base;
  if (!path.empty()) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
    doc = json::parse(read_file(path), nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config file is not valid JSON: " + path.string());
    base = path.parent_path();
  }
  for (const auto& o : overrides) apply_override(doc, o);
  if (const char* env = std::getenv("DTL_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0') throw ConfigError(std::string("DTL_SEED is not an unsigned integer: ") + env);
    doc["seed"] = v;
  }
  if (seed) doc["seed"] = *seed;
  return parse_config(doc, base);
}

}  // namespace dtl
