#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "dtl/dataset.hpp"
#include "dtl/error.hpp"
#include "dtl/planted.hpp"

using namespace dtl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  void write(const std::string& file, const std::string& text) const { std::ofstream(path / file) << text; }
};

DatasetRecord make(std::string id, double yaw, Light light, Sample s = Sample({2, 2}, 0.0)) {
  DatasetRecord r;
  r.id = std::move(id);
  r.yaw = yaw;
  r.light = light;
  r.sample = std::move(s);
  r.attrs = {{"Male", 1}};
  return r;
}

}  // namespace

TEST_CASE("annotation join") {
  TempDir d("dtl_ds_join");
  d.write("attr.csv", "id,Male,Smiling\n000042,1,-1\n000043,-1,1\n");
  d.write("pose.csv", "000042,-12.3,1.0,0.4\n000043,5,0,0\n000044,1,1,1\n");
  d.write("light.csv", "000042,LEFT\n000043,CENTER\n");
  const LoadResult r = load_annotations(d.path / "attr.csv", d.path / "pose.csv", d.path / "light.csv");
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[0].id == "000042");
  CHECK(r.records[0].light == Light::Left);
  CHECK(r.records[0].yaw == -12.3);
  CHECK(r.records[0].attrs.at("Smiling") == -1);
  CHECK(r.dropped == 1);
  CHECK(r.warnings.size() == 1);

  d.write("deny.txt", "000043\n");
  CHECK(load_annotations(d.path / "attr.csv", d.path / "pose.csv", d.path / "light.csv", d.path / "deny.txt")
            .records.size() == 1);
}

TEST_CASE("malformed annotations name the line") {
  TempDir d("dtl_ds_bad");
  d.write("attr.csv", "id,Male\n000001,1\n000002,0\n");
  d.write("pose.csv", "000001,0,0,0\n");
  d.write("light.csv", "000001,LEFT\n");
  try {
    load_annotations(d.path / "attr.csv", d.path / "pose.csv", d.path / "light.csv");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("attr.csv:3") != std::string::npos);
  }
  d.write("attr.csv", "id,Male\n000001,1\n");
  d.write("light.csv", "000001,UP\n");
  CHECK_THROWS_AS(load_annotations(d.path / "attr.csv", d.path / "pose.csv", d.path / "light.csv"), DataError);
  d.write("light.csv", "000001,LEFT\n");
  d.write("pose.csv", "000001,200,0,0\n");
  CHECK_THROWS_AS(load_annotations(d.path / "attr.csv", d.path / "pose.csv", d.path / "light.csv"), DataError);
  d.write("pose.csv", "000001,0,0\n");
  CHECK_THROWS_AS(load_pose_csv(d.path / "pose.csv"), DataError);
}

TEST_CASE("empty intersection is a warning, not an error") {
  TempDir d("dtl_ds_empty");
  d.write("attr.csv", "id,Male\n1,1\n");
  d.write("pose.csv", "2,0,0,0\n");
  d.write("light.csv", "3,LEFT\n");
  const LoadResult r = load_annotations(d.path / "attr.csv", d.path / "pose.csv", d.path / "light.csv");
  CHECK(r.records.empty());
  CHECK(r.dropped == 3);
  CHECK(r.warnings.size() == 2);
}

TEST_CASE("save then load round-trips exactly") {
  TempDir d("dtl_ds_rt");
  PlantedSpec spec;
  spec.n_records = 200;
  spec.attr_names = {"Male", "Smiling"};
  spec.attr_shift = {0.1, 0.2};
  spec.attr_tilt = {0.0, 0.0};
  spec.seed = 3;
  auto records = PlantedModel(spec).generate();
  save_annotations(records, d.path);
  for (const auto& r : records) write_dtl(d.path / (r.id + ".dtl"), r.sample);
  auto loaded = load_annotations(d.path / "attributes.csv", d.path / "pose.csv", d.path / "light.csv").records;
  attach_samples(loaded, d.path);
  CHECK(loaded == records);
}

TEST_CASE("flip rules") {
  const Sample img({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  DatasetRecord r = make("a", 45.0, Light::Right, img);
  r.roll = 3.0;
  r.pitch = 7.0;
  const DatasetRecord f = flip_record(r);
  CHECK(f.yaw == -45.0);
  CHECK(f.light == Light::Left);
  CHECK(f.roll == -3.0);
  CHECK(f.pitch == 7.0);
  CHECK(f.attrs == r.attrs);
  CHECK(f.sample.values == std::vector<double>{3, 2, 1, 6, 5, 4});
  CHECK(flip_record(f) == r);
  CHECK(flip_record(make("c", 1.0, Light::Center)).light == Light::Center);
  const Sample rgb({1, 2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(mirror_sample(rgb).values == std::vector<double>{4, 5, 6, 1, 2, 3});
  CHECK_THROWS_AS(mirror_sample(Sample::vector({1.0, 2.0})), std::invalid_argument);
}

TEST_CASE("flipped record enters a mirrored query") {
  std::vector<DatasetRecord> store{make("a", 44.0, Light::Right), make("b", 10.0, Light::Left)};
  FilterQuery q;
  q.theta = -45.0;
  q.light = Light::Left;
  q.min_count = 1;
  const FilterResult r = filter_cluster(store, q);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].id == "a");
  CHECK(r.records[0].flipped);
  CHECK(r.records[0].yaw == -44.0);
  CHECK(r.widenings == 0);
  q.use_flip = false;
  CHECK(filter_cluster(store, q).records.front().id == "b");
}

TEST_CASE("exact match never widens") {
  std::vector<DatasetRecord> store{make("a", 30.0, Light::Center), make("b", 31.9, Light::Center)};
  FilterQuery q;
  q.theta = 30.0;
  q.min_count = 1;
  const FilterResult r = filter_cluster(store, q);
  CHECK(r.records.size() == 1);
  CHECK(r.records[0].id == "a");
  CHECK(r.delta == 2.0);
  CHECK_FALSE(r.shortfall);
}

TEST_CASE("widening and shortfall") {
  std::vector<DatasetRecord> store{make("a", 0.0, Light::Center), make("b", 7.0, Light::Center)};
  FilterQuery q;
  q.theta = 0.0;
  q.min_count = 3;  // a, b, and a's flip have |yaw| <= 7; b's flip too
  q.max_widenings = 1;
  FilterResult r = filter_cluster(store, q);
  CHECK(r.delta == 4.0);
  CHECK(r.shortfall);
  CHECK(r.records.size() == 2);  // a and its mirror
  q.max_widenings = 6;
  r = filter_cluster(store, q);
  CHECK(r.delta == 8.0);
  CHECK_FALSE(r.shortfall);
  CHECK(r.records.size() == 3);
  for (const auto& rec : r.records) CHECK(std::abs(rec.yaw - q.theta) <= r.delta);
  q.delta0 = 0.0;
  CHECK_THROWS_AS(filter_cluster(store, q), ConfigError);
}

TEST_CASE("nearest selection matches a brute-force sort") {
  PlantedSpec spec;
  spec.n_records = 10000;
  spec.seed = 17;
  const auto store = PlantedModel(spec).generate();
  FilterQuery q;
  q.theta = 0.0;
  q.min_count = 1000;
  const FilterResult r = filter_cluster(store, q);
  REQUIRE(r.records.size() == 1000);
  std::vector<double> all;
  for (const auto& rec : store) {
    all.push_back(std::abs(rec.yaw));
    all.push_back(std::abs(rec.yaw));  // flipped copy
  }
  std::sort(all.begin(), all.end());
  std::vector<double> got;
  for (const auto& rec : r.records) got.push_back(std::abs(rec.yaw));
  std::sort(got.begin(), got.end());
  CHECK(got == std::vector<double>(all.begin(), all.begin() + 1000));
}

TEST_CASE("class statistics") {
  std::vector<DatasetRecord> same(3, make("x", 0, Light::Center, Sample({2, 2}, 0.7)));
  const ClassStats s = class_stats(same);
  CHECK(s.variance < 1e-30);
  for (double v : s.centroid.values) CHECK(v == doctest::Approx(0.7).epsilon(1e-15));
  std::vector<DatasetRecord> two{make("a", 0, Light::Center, Sample({1, 1}, 0.0)),
                                 make("b", 0, Light::Center, Sample({1, 1}, 2.0))};
  const ClassStats t = class_stats(two);
  CHECK(t.centroid[0] == 1.0);
  CHECK(t.variance == 1.0);
  ClassStats z{Sample({4}, 0.0), 0.0, 1}, o{Sample({4}, 1.0), 0.0, 1};
  CHECK(centroid_mse(z, o) == 1.0);
  CHECK_THROWS_AS(class_stats({}), std::invalid_argument);

  // wholesale flip keeps the variance
  PlantedSpec spec;
  spec.n_records = 300;
  spec.seed = 4;
  auto cluster = PlantedModel(spec).generate();
  std::vector<DatasetRecord> flipped;
  for (const auto& r : cluster) flipped.push_back(flip_record(r));
  CHECK(class_stats(flipped).variance == doctest::Approx(class_stats(cluster).variance).epsilon(1e-12));
}

TEST_CASE("yaw histogram") {
  const YawHistogram h = yaw_histogram(std::vector<double>(10, 0.0), 5.0);
  CHECK(h.counts == std::vector<std::size_t>{10});
  CHECK(h.fractions == std::vector<double>{1.0});
  std::vector<double> yaws;
  RngStream rng(2);
  for (int i = 0; i < 997; ++i) yaws.push_back(rng.uniform() * 180 - 90);
  const YawHistogram g = yaw_histogram(yaws, 10.0);
  double total = 0;
  for (double f : g.fractions) total += f;
  CHECK(std::abs(total - 1.0) < 1e-12);
  CHECK(g.to_csv().rfind("bin_lo,bin_hi,count,fraction\n", 0) == 0);
  CHECK(fraction_within({-10, 0, 10, 11}, -10, 10) == 0.75);
  CHECK_THROWS_AS(yaw_histogram(std::vector<double>{}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(yaw_histogram(yaws, 0.0), std::invalid_argument);
}

TEST_CASE("planted generator is deterministic and mirror consistent") {
  PlantedSpec spec;
  spec.n_records = 50;
  spec.mirror_consistent = true;
  spec.light_shift = 0.2;
  spec.seed = 8;
  const PlantedModel m(spec);
  CHECK(m.generate() == m.generate());
  for (double yaw : {-30.0, 12.0}) {
    const Sample a = mirror_sample(m.mean_at(yaw, {}, Light::Left));
    const Sample b = m.mean_at(-yaw, {}, Light::Right);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    CHECK(m.estimate_yaw(m.mean_at(yaw, {}, Light::Center), {}, Light::Center) == doctest::Approx(yaw).epsilon(1e-9));
  }
}
