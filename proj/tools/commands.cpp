#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "dtl/cli.hpp"
#include "dtl/config.hpp"
#include "dtl/diffusion.hpp"
#include "dtl/embedding.hpp"
#include "dtl/error.hpp"
#include "dtl/imageops.hpp"

namespace dtl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Collects outputs of one command and writes manifest.json last.
class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {
    if (dir_.empty()) throw ConfigError("--out is required");
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw DataError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  const fs::path& path() const { return dir_; }

  void write(const std::string& name, std::string_view bytes) {
    write_file_atomic(dir_ / name, bytes);
    files_[name] = fnv1a_hex(bytes);
  }
  void write(const std::string& name, const Sample& s) {
    const auto bytes = encode_dtl(s);
    write(name, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  }

  // Registers files written by other code (model weights, fits) under `prefix`.
  void track_prefix(const std::string& prefix) {
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(dir_))
      if (e.path().filename().string().rfind(prefix, 0) == 0) found.push_back(e.path());
    for (const auto& f : found) files_[f.filename().string()] = fnv1a_hex(read_file(f));
  }

  void input(const std::string& label, const fs::path& file) { inputs_[label] = fnv1a_hex(read_file(file)); }
  void input_digest(const std::string& label, const std::string& digest) { inputs_[label] = digest; }

  void finish(const std::string& command, const RunConfig* cfg, json extra = json::object()) {
    json m;
    m["tool"] = "dtl";
    m["version"] = kToolVersion;
    m["command"] = command;
    if (cfg) {
      m["config_hash"] = cfg->hash();
      m["config"] = cfg->resolved;
      m["seed"] = cfg->seed;
    }
    m["inputs"] = inputs_;
    m["outputs"] = files_;
    for (auto& [k, v] : extra.items()) m[k] = v;
    write_file_atomic(dir_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  std::map<std::string, std::string> files_, inputs_;
};

// Records plus, for planted data, the generating model (used as yaw probe).
struct Records {
  std::vector<DatasetRecord> records;
  std::unique_ptr<PlantedModel> planted;
  std::vector<std::string> warnings;
};

Records load_records(const RunConfig& cfg, bool need_samples, OutputDir* out) {
  Records r;
  const auto& d = cfg.dataset;
  if (d.planted) {
    r.planted = std::make_unique<PlantedModel>(*d.planted);
    r.records = r.planted->generate();
    if (out) out->input_digest("dataset.planted", fnv1a_hex(cfg.resolved["dataset"]["planted"].dump()));
    return r;
  }
  if (!d.attributes) throw ConfigError("this command needs dataset.planted or dataset annotation files");
  LoadResult loaded = load_annotations(*d.attributes, *d.pose, *d.light, d.denylist);
  r.records = std::move(loaded.records);
  r.warnings = std::move(loaded.warnings);
  if (out) {
    out->input("dataset.attributes", *d.attributes);
    out->input("dataset.pose", *d.pose);
    out->input("dataset.light", *d.light);
  }
  if (need_samples) {
    if (!d.samples) throw ConfigError("this command needs dataset.samples (a directory of <id>.dtl files)");
    attach_samples(r.records, *d.samples);
  }
  return r;
}

DenoiserModel load_model(const RunConfig& cfg) {
  if (cfg.model.kind == "analytic") {
    if (!cfg.dataset.mixture) throw ConfigError("model.kind 'analytic' needs dataset.mixture");
    return DenoiserModel{*cfg.dataset.mixture};
  }
  if (!cfg.model.dir) throw ConfigError("model.kind 'mlp' needs model.dir");
  return DenoiserModel{load_mlp(*cfg.model.dir, "denoiser")};
}

MlpParams load_embedder(const RunConfig& cfg) {
  if (!cfg.model.embedder_dir) throw ConfigError("no trained embedder: set model.embedder_dir");
  return load_mlp(*cfg.model.embedder_dir, "embedder");
}

Shape model_shape(const DenoiserModel& model) {
  if (const auto* mix = std::get_if<GaussianMixture>(&model.variant)) return mix->shape();
  return {model.dim()};
}

Sample reshaped(Sample s, const Shape& shape) {
  Sample out(shape, std::move(s.values));
  return out;
}

struct LatentMaps {
  EmbedFn embed;
  GenerateFn generate;
  std::string model_digest;
};

LatentMaps latent_maps(const RunConfig& cfg, const NoiseSchedule& sched) {
  LatentMaps maps;
  const std::string& mode = cfg.trajectory.embed;
  if (mode == "identity") {
    maps.embed = [](const Sample& x) { return x; };
    maps.generate = [](const Sample& z) { return z; };
    return maps;
  }
  auto model = std::make_shared<DenoiserModel>(load_model(cfg));
  maps.model_digest = model->digest();
  maps.generate = [model, &sched](const Sample& z) {
    return reshaped(ddim_generate(*model, sched, Sample::vector(z.values)), z.shape);
  };
  if (mode == "ode") {
    maps.embed = [model, &sched](const Sample& x) {
      return reshaped(invert_ode(*model, sched, Sample::vector(x.values)), x.shape);
    };
  } else {
    auto emb = std::make_shared<MlpParams>(load_embedder(cfg));
    maps.embed = [emb](const Sample& x) { return reshaped(embed_net(*emb, Sample::vector(x.values)), x.shape); };
  }
  return maps;
}

std::vector<Sample> batch_of(const Sample& s) {
  if (s.shape.size() < 2) return {s};
  return unstack(s);
}

// Image rendering for trail frames: (H, W) -> PGM, (H, W, 3) -> PPM.
std::pair<std::string, std::string> render_frame(const Sample& s) {
  if (s.shape.size() == 2) {
    GrayImage g{s.shape[0], s.shape[1], s.values};
    for (double& v : g.pixels) v = std::clamp(v, 0.0, 1.0);
    return {".pgm", encode_pgm(g)};
  }
  if (s.shape.size() == 3 && s.shape[2] == 3) {
    RgbImage img(s.shape[0], s.shape[1]);
    for (std::size_t i = 0; i < s.size(); ++i) img.pixels[i] = std::clamp(s[i], 0.0, 1.0);
    return {".ppm", encode_ppm(img)};
  }
  return {"", ""};
}

std::string frame_name(std::size_t i) {
  std::string n = std::to_string(i);
  return "frame_" + std::string(n.size() < 3 ? 3 - n.size() : 0, '0') + n;
}

// Common flags shared by config-driven subcommands.
struct CommonOpts {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out;

  void attach(CLI::App* app, bool needs_out = true) {
    app->add_option("-c,--config", config, "Run configuration (JSON)");
    app->add_option("--set", sets, "Override a config value, e.g. --set train.n_steps=500");
    app->add_option("--seed", seed, "Seed (overrides config and DTL_SEED)");
    if (needs_out) app->add_option("-o,--out", out, "Output directory")->required();
  }

  RunConfig load() const { return load_config(config, sets, seed); }
};

// ---------------------------------------------------------------- commands

void cmd_train(const CommonOpts& o, bool embedder, std::ostream& out) {
  const RunConfig cfg = o.load();
  const NoiseSchedule sched(cfg.schedule);
  OutputDir dir(o.out);
  dir.write("schedule.csv", sched.to_csv());

  if (embedder) {
    const DenoiserModel model = load_model(cfg);
    dir.input_digest("model", model.digest());
    EmbedderConfig ec;
    ec.train = cfg.embedder.train;
    ec.n_pairs = cfg.embedder.n_pairs;
    ec.hidden = cfg.embedder.hidden;
    const EmbedderResult r = train_embedder(model, sched, ec);
    save_mlp(r.params, dir.path(), "embedder");
    dir.track_prefix("embedder.");
    dir.write("embedder_loss.csv", loss_trace_csv(r.losses));
    dir.finish("train --embedder", &cfg, {{"final_loss", r.losses.back()}});
    out << "embedder trained: " << r.losses.size() << " steps, final loss " << format_double(r.losses.back())
        << "\n";
    return;
  }

  DataSampler sampler;
  std::size_t dim = 0;
  std::shared_ptr<Records> records;
  if (cfg.dataset.mixture) {
    const GaussianMixture mix = *cfg.dataset.mixture;
    dim = mix.dim();
    sampler = [mix](RngStream& rng) { return mix.sample(rng); };
    dir.input_digest("dataset.mixture", DenoiserModel{mix}.digest());
  } else {
    records = std::make_shared<Records>(load_records(cfg, true, &dir));
    if (records->records.empty()) throw DataError("training set is empty");
    dim = records->records.front().sample.size();
    sampler = [records](RngStream& rng) {
      const auto& rs = records->records;
      const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(rs.size()) - 1));
      return Sample::vector(rs[i].sample.values);
    };
  }
  (void)dim;
  const TrainResult r = train_denoiser(sampler, sched, cfg.train, cfg.model.time_features, cfg.model.hidden);
  save_mlp(r.params, dir.path(), "denoiser");
  dir.track_prefix("denoiser.");
  dir.write("loss.csv", loss_trace_csv(r.losses));
  dir.finish("train", &cfg, {{"final_loss", r.losses.back()}});
  out << "denoiser trained: " << r.losses.size() << " steps, final loss " << format_double(r.losses.back()) << "\n";
}

void cmd_sample(const CommonOpts& o, double eta, int n, bool ancestral, std::ostream& out) {
  const RunConfig cfg = o.load();
  if (n < 1) throw ConfigError("--n must be positive");
  const NoiseSchedule sched(cfg.schedule);
  if (!ancestral) validate_eta(sched, eta);
  const DenoiserModel model = load_model(cfg);
  const Shape shape = model_shape(model);
  OutputDir dir(o.out);
  dir.input_digest("model", model.digest());
  RngStream rng(cfg.seed);
  std::vector<Sample> xs, latents;
  for (int i = 0; i < n; ++i) {
    if (ancestral) {
      xs.push_back(ddpm_sample(model, sched, shape, rng));
    } else {
      latents.push_back(rng.normal_like(shape));
      xs.push_back(ddim_sample(model, sched, latents.back(), eta, rng));
    }
  }
  dir.write("samples.dtl", stack(xs));
  if (!ancestral) dir.write("latents.dtl", stack(latents));
  dir.finish("sample", &cfg, {{"eta", eta}, {"n", n}, {"sampler", ancestral ? "ddpm" : "ddim"}});
  out << "wrote " << n << " samples to " << (dir.path() / "samples.dtl").string() << "\n";
}

void cmd_embed(const CommonOpts& o, const std::string& input, const std::string& mode, std::ostream& out) {
  const RunConfig cfg = o.load();
  if (mode != "ode" && mode != "net") throw ConfigError("--mode must be ode or net");
  const NoiseSchedule sched(cfg.schedule);
  const DenoiserModel model = load_model(cfg);
  std::optional<MlpParams> emb;
  if (mode == "net") emb = load_embedder(cfg);
  if (!fs::exists(input)) throw DataError("input not found: " + input);
  const Sample batch = read_dtl(input);
  const std::vector<Sample> probes = batch_of(batch);
  for (const auto& p : probes)
    if (p.size() != model.dim())
      throw DataError("input samples have " + std::to_string(p.size()) + " values, model expects " +
                      std::to_string(model.dim()));

  EmbedFn fn;
  if (emb) fn = [&](const Sample& x) { return embed_net(*emb, Sample::vector(x.values)); };
  else fn = [&](const Sample& x) { return invert_ode(model, sched, Sample::vector(x.values)); };

  OutputDir dir(o.out);
  dir.input("input", input);
  dir.input_digest("model", model.digest());
  std::vector<Sample> latents, flat;
  for (const auto& p : probes) {
    flat.push_back(Sample::vector(p.values));
    latents.push_back(fn(p));
  }
  std::size_t k = 0;
  const EmbeddingReport rep = roundtrip_report(model, sched, [&](const Sample&) { return latents[k++]; }, flat);
  dir.write("latents.dtl", stack(latents));
  std::ostringstream csv;
  csv << "index,roundtrip_mse\n";
  for (std::size_t i = 0; i < rep.per_sample_mse.size(); ++i) csv << i << ',' << format_double(rep.per_sample_mse[i]) << '\n';
  dir.write("roundtrip.csv", csv.str());
  dir.finish("embed", &cfg, {{"mode", mode}, {"mean_roundtrip_mse", rep.mean_mse}, {"T", rep.n_steps}});
  out << "embedded " << probes.size() << " samples (" << mode << "), mean round-trip MSE "
      << format_double(rep.mean_mse) << "\n";
}

void cmd_rotate(const CommonOpts& o, const std::string& source_id, double target_yaw, std::ostream& out) {
  const RunConfig cfg = o.load();
  const NoiseSchedule sched(cfg.schedule);
  OutputDir dir(o.out);
  Records data = load_records(cfg, true, &dir);
  for (const auto& w : data.warnings) out << "warning: " << w << "\n";
  auto src_it = std::find_if(data.records.begin(), data.records.end(),
                             [&](const DatasetRecord& r) { return r.id == source_id; });
  if (src_it == data.records.end()) throw DataError("source id not found: " + source_id);
  const DatasetRecord source = *src_it;

  LadderSpec ladder = cfg.trajectory.ladder;
  for (const auto& name : cfg.trajectory.match_attrs) {
    auto it = source.attrs.find(name);
    if (it == source.attrs.end()) throw DataError("source record has no attribute " + name);
    ladder.query.attrs[name] = it->second;
  }
  if (cfg.trajectory.match_light) ladder.query.light = source.light;

  const LatentMaps maps = latent_maps(cfg, sched);
  if (!maps.model_digest.empty()) dir.input_digest("model", maps.model_digest);
  const FitPair pair = split_directions(data.records, maps.embed, ladder);
  if (pair.left.shortfall || pair.right.shortfall)
    out << "warning: some yaw clusters have fewer than " << ladder.query.min_count << " records\n";

  YawProbeFn probe;
  if (data.planted) {
    const PlantedModel* pm = data.planted.get();
    probe = [pm, source](const Sample& x) { return pm->estimate_yaw(x, source.attrs, source.light); };
  }
  TraversalConfig tc = cfg.trajectory.traversal;
  tc.target_yaw = target_yaw;
  const Sample z0 = maps.embed(source.sample);
  const TraversalResult res = rotate(pair, z0, source.yaw, tc, maps.generate, probe);

  std::vector<Sample> latents, outputs;
  std::ostringstream csv;
  csv << "step,phase,expected_yaw,measured_yaw,extra,frame\n";
  for (std::size_t i = 0; i < res.trail.size(); ++i) {
    const auto& p = res.trail[i];
    latents.push_back(p.latent);
    outputs.push_back(p.output);
    auto [ext, bytes] = render_frame(p.output);
    const std::string frame = ext.empty() ? "" : frame_name(i + 1) + ext;
    if (!frame.empty()) dir.write(frame, bytes);
    csv << (i + 1) << ',' << (p.phase == TrailPhase::Frontalize ? "frontalize" : "rotate") << ','
        << format_double(p.expected_yaw) << ',' << (p.measured_yaw ? format_double(*p.measured_yaw) : "") << ','
        << (p.extra ? 1 : 0) << ',' << frame << '\n';
  }
  dir.write("trail.dtl", stack(outputs));
  dir.write("trail_latents.dtl", stack(latents));
  dir.write("trail.csv", csv.str());
  save_fit(pair.left.fit, dir.path(), "fit_left");
  save_fit(pair.right.fit, dir.path(), "fit_right");
  dir.track_prefix("fit_");
  const auto& last = res.trail.back();
  dir.finish("rotate", &cfg,
             {{"source_id", source_id},
              {"source_yaw", source.yaw},
              {"target_yaw", target_yaw},
              {"steps", res.trail.size()},
              {"extra_steps", res.extra_steps},
              {"verified", res.verified},
              {"complete", res.complete}});
  out << "rotated " << source_id << " from " << format_double(source.yaw) << " to " << format_double(target_yaw)
      << " in " << res.trail.size() << " steps";
  if (last.measured_yaw) out << ", final measured yaw " << format_double(*last.measured_yaw);
  else out << " (unverified: no yaw probe)";
  out << (res.verified && !res.complete ? ", target not reached" : "") << "\n";
}

void cmd_analyze_slopes(const CommonOpts& o, const std::vector<std::string>& group_by, std::ostream& out) {
  const RunConfig cfg = o.load();
  const NoiseSchedule sched(cfg.schedule);
  OutputDir dir(o.out);
  Records data = load_records(cfg, true, &dir);
  const LatentMaps maps = latent_maps(cfg, sched);
  if (!maps.model_digest.empty()) dir.input_digest("model", maps.model_digest);

  // Every combination of observed values of the grouping attributes.
  std::vector<AttributeMap> groups{AttributeMap{}};
  for (const auto& name : group_by) {
    std::set<int> values;
    for (const auto& r : data.records) {
      auto it = r.attrs.find(name);
      if (it == r.attrs.end()) throw DataError("records lack attribute " + name);
      values.insert(it->second);
    }
    std::vector<AttributeMap> next;
    for (const auto& g : groups)
      for (int v : values) {
        AttributeMap m = g;
        m[name] = v;
        next.push_back(std::move(m));
      }
    groups = std::move(next);
  }

  std::vector<TrajectoryFit> fits;
  std::vector<std::string> labels;
  std::vector<std::size_t> group_of;
  for (std::size_t gi = 0; gi < groups.size(); ++gi)
    for (const auto& [lo, hi] : cfg.trajectory.windows) {
      FilterQuery q = cfg.trajectory.ladder.query;
      for (const auto& [k, v] : groups[gi]) q.attrs[k] = v;
      const WindowFit wf = fit_window(data.records, AngleLadder::span(lo, hi, cfg.trajectory.ladder.step), q, maps.embed);
      fits.push_back(wf.fit);
      group_of.push_back(gi);
      std::string label;
      for (const auto& [k, v] : groups[gi]) label += k + (v > 0 ? "+" : "-") + " ";
      labels.push_back(label + "[" + format_double(lo) + "," + format_double(hi) + "]");
    }
  const Matrix m = slope_cosine_matrix(fits);
  dir.write("cosine.csv", matrix_csv(m, labels));
  dir.write("cosine.pgm", matrix_heatmap_pgm(m));

  double within = 0, cross = 0;
  std::size_t nw = 0, nc = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = i + 1; j < m.size(); ++j) {
      if (group_of[i] == group_of[j]) within += m[i][j], ++nw;
      else cross += m[i][j], ++nc;
    }
  json summary{{"fits", fits.size()}, {"groups", groups.size()}};
  if (nw) summary["within_group_mean"] = within / static_cast<double>(nw);
  if (nc) summary["cross_group_mean"] = cross / static_cast<double>(nc);
  dir.finish("analyze-slopes", &cfg, summary);
  out << fits.size() << "x" << fits.size() << " cosine matrix written to " << (dir.path() / "cosine.csv").string()
      << "\n";
  if (nw) out << "mean within-group similarity " << format_double(within / static_cast<double>(nw)) << "\n";
  if (nc) out << "mean cross-group similarity " << format_double(cross / static_cast<double>(nc)) << "\n";
}

void cmd_colorfix(const std::string& target, const std::string& source, const std::string& mask,
                  const std::string& out_dir, std::ostream& out) {
  OutputDir dir(out_dir);
  const RgbImage t = read_ppm(target), s = read_ppm(source);
  std::optional<GrayImage> m;
  if (!mask.empty()) m = read_pgm(mask);
  dir.input("target", target);
  dir.input("source", source);
  if (m) dir.input("mask", mask);
  const ColorCorrection cc = color_correct(t, s, m);
  dir.write("corrected.ppm", encode_ppm(cc.image));
  dir.finish("colorfix", nullptr, {{"clipped", cc.clipped}, {"masked", m.has_value()}});
  out << "color-corrected image written to " << (dir.path() / "corrected.ppm").string() << " (" << cc.clipped
      << " channel values clipped)\n";
}

void cmd_stats(const CommonOpts& o, double bin_width, const std::vector<std::string>& group_by, std::ostream& out) {
  const RunConfig cfg = o.load();
  OutputDir dir(o.out);
  std::vector<double> yaws;
  Records data;
  const bool pose_only = cfg.dataset.pose && !cfg.dataset.attributes;
  if (pose_only) {
    dir.input("dataset.pose", *cfg.dataset.pose);
    for (const auto& p : load_pose_csv(*cfg.dataset.pose)) yaws.push_back(p.yaw);
  } else {
    data = load_records(cfg, cfg.dataset.samples.has_value(), &dir);
    for (const auto& r : data.records) yaws.push_back(r.yaw);
  }
  if (yaws.empty()) throw DataError("no records to summarize");
  const YawHistogram h = yaw_histogram(yaws, bin_width);
  dir.write("yaw_histogram.csv", h.to_csv());
  const double within10 = fraction_within(yaws, -10, 10), within40 = fraction_within(yaws, -40, 40);
  json summary{{"records", yaws.size()}, {"fraction_within_10", within10}, {"fraction_outside_40", 1.0 - within40}};

  const bool have_samples = !data.records.empty() && !data.records.front().sample.values.empty();
  if (have_samples) {
    std::map<std::string, std::vector<DatasetRecord>> classes;
    for (const auto& r : data.records) {
      std::string key;
      for (const auto& name : group_by) {
        auto it = r.attrs.find(name);
        if (it == r.attrs.end()) throw DataError("record " + r.id + " lacks attribute " + name);
        key += name + (it->second > 0 ? "+" : "-") + " ";
      }
      if (key.empty()) key = "all";
      else key.pop_back();
      classes[key].push_back(r);
    }
    std::ostringstream csv;
    csv << "class,count,variance\n";
    std::vector<ClassStats> stats;
    std::vector<std::string> names;
    for (const auto& [name, members] : classes) {
      stats.push_back(class_stats(members));
      names.push_back(name);
      csv << name << ',' << stats.back().count << ',' << format_double(stats.back().variance) << '\n';
    }
    dir.write("class_stats.csv", csv.str());
    Matrix mse(stats.size(), std::vector<double>(stats.size(), 0.0));
    for (std::size_t i = 0; i < stats.size(); ++i)
      for (std::size_t j = 0; j < stats.size(); ++j) mse[i][j] = centroid_mse(stats[i], stats[j]);
    dir.write("centroid_mse.csv", matrix_csv(mse, names));
  }
  dir.finish("stats", &cfg, summary);
  out << yaws.size() << " records; " << format_double(100.0 * within10) << "% with |yaw| <= 10, "
      << format_double(100.0 * (1.0 - within40)) << "% with |yaw| > 40\n";
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const NumericalError*>(&e)) return 4;
  if (dynamic_cast<const std::invalid_argument*>(&e) || dynamic_cast<const std::out_of_range*>(&e)) return 2;
  return 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent-space trajectories for diffusion models", "dtl"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  CommonOpts train_o, sample_o, embed_o, rotate_o, slopes_o, stats_o;
  bool embedder = false, ancestral = false;
  double eta = 0.0, target_yaw = 0.0, bin_width = 10.0;
  int n = 1;
  std::string input, mode = "ode", source_id, target, source, mask, color_out;
  std::vector<std::string> slope_groups, stat_groups;

  auto* train = app.add_subcommand("train", "Train the denoiser (or, with --embedder, the embedder)");
  train_o.attach(train);
  train->add_flag("--embedder", embedder, "Train the pair-supervised embedder against the configured model");

  auto* sample = app.add_subcommand("sample", "Draw samples with the generalized DDIM sampler");
  sample_o.attach(sample);
  sample->add_option("--eta", eta, "Stochasticity (0 = deterministic)");
  sample->add_option("--n", n, "Number of samples");
  sample->add_flag("--ddpm", ancestral, "Use the ancestral DDPM sampler instead");

  auto* embed = app.add_subcommand("embed", "Map samples to latents");
  embed_o.attach(embed);
  embed->add_option("-i,--input", input, "DTL1 batch of samples")->required();
  embed->add_option("--mode", mode, "ode (reverse flow) or net (trained embedder)");

  auto* rot = app.add_subcommand("rotate", "Rotate a record along the fitted yaw trajectory");
  rotate_o.attach(rot);
  rot->add_option("--source-id", source_id, "Record id to rotate")->required();
  rot->add_option("--target-yaw", target_yaw, "Target yaw in degrees")->required();

  auto* slopes = app.add_subcommand("analyze-slopes", "Cosine similarity of trajectory slopes across groups");
  slopes_o.attach(slopes);
  slopes->add_option("--group-by", slope_groups, "Attribute names to split by");

  auto* color = app.add_subcommand("colorfix", "Match Lab statistics of a target image to a source image");
  color->add_option("--target", target, "Target PPM")->required();
  color->add_option("--source", source, "Source PPM")->required();
  color->add_option("--mask", mask, "Binary PGM; statistics over foreground only");
  color->add_option("-o,--out", color_out, "Output directory")->required();

  auto* stats = app.add_subcommand("stats", "Yaw histogram and class statistics of a dataset");
  stats_o.attach(stats);
  stats->add_option("--bin-width", bin_width, "Histogram bin width in degrees");
  stats->add_option("--group-by", stat_groups, "Attribute names defining classes");

  std::vector<std::string> argv_store{"dtl"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) cmd_train(train_o, embedder, out);
    else if (*sample) cmd_sample(sample_o, eta, n, ancestral, out);
    else if (*embed) cmd_embed(embed_o, input, mode, out);
    else if (*rot) cmd_rotate(rotate_o, source_id, target_yaw, out);
    else if (*slopes) cmd_analyze_slopes(slopes_o, slope_groups, out);
    else if (*color) cmd_colorfix(target, source, mask, color_out, out);
    else if (*stats) cmd_stats(stats_o, bin_width, stat_groups, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 0;
}

}  // namespace dtl
