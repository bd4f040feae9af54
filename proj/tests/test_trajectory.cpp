#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "dtl/error.hpp"
#include "dtl/planted.hpp"
#include "dtl/trajectory.hpp"

using namespace dtl;

namespace {

const EmbedFn identity = [](const Sample& x) { return x; };

DatasetRecord rec(const std::string& id, double yaw, Sample s) {
  DatasetRecord r;
  r.id = id;
  r.yaw = yaw;
  r.sample = std::move(s);
  return r;
}

PlantedSpec exact_spec() {
  PlantedSpec spec;
  spec.yaw_rungs = {-40, -30, -20, -10, 0, 10, 20, 30, 40};
  spec.n_records = 2;
  spec.noise_sd = 0.0;
  spec.seed = 12;
  return spec;
}

LadderSpec ladder(std::size_t min_count) {
  LadderSpec s;
  s.query.min_count = min_count;
  s.query.use_flip = false;
  return s;
}

}  // namespace

TEST_CASE("angle ladder") {
  CHECK(AngleLadder::span(0, -40, 10).thetas == std::vector<double>{0, -10, -20, -30, -40});
  CHECK_THROWS_AS((AngleLadder{{0.0}}.validate()), ConfigError);
  CHECK_THROWS_AS((AngleLadder{{0.0, 10.0, 5.0}}.validate()), ConfigError);
}

TEST_CASE("cluster centroids") {
  ClusterMap clusters;
  clusters[0.0] = {rec("a", 0, Sample::vector({0.0, 0.0})), rec("b", 0, Sample::vector({2.0, 2.0}))};
  clusters[10.0] = {rec("c", 10, Sample::vector({5.0, 1.0}))};
  const CentroidMap c = embed_clusters(clusters, identity);
  CHECK(c.at(0.0) == Sample::vector({1.0, 1.0}));
  CHECK(c.at(10.0) == Sample::vector({5.0, 1.0}));
  clusters[20.0] = {};
  CHECK_THROWS_AS(embed_clusters(clusters, identity), DataError);
}

TEST_CASE("fit_line on exact lines") {
  const Sample a = Sample::vector({1.0, -2.0, 0.5}), u = Sample::vector({0.03, 0.04, 0.0});
  CentroidMap c;
  for (double th : {-10.0, 0.0, 10.0, 20.0}) c[th] = lincomb(1.0, a, th, u);
  const TrajectoryFit fit = fit_line(c);
  CHECK(fit.residual_rms < 1e-15);
  CHECK(fit.speed == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(std::abs(norm(fit.direction) - 1.0) < 1e-12);
  CHECK(cosine(fit.direction, u) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.reference_theta == 0.0);
  for (std::size_t j = 0; j < 3; ++j) CHECK(fit.base[j] == doctest::Approx(a[j]).epsilon(1e-12));

  CentroidMap two{{10.0, Sample::vector({1.0, 1.0})}, {-10.0, Sample::vector({0.0, 3.0})}};
  const TrajectoryFit f2 = fit_line(two);
  CHECK(f2.residual_rms < 1e-15);
  CHECK(f2.reference_theta == -10.0);  // tie on |theta| goes to the smaller angle
  CHECK(f2.point_at(10.0)[1] == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(fit_line(CentroidMap{{0.0, a}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_line(CentroidMap{{0.0, a}, {10.0, a}}), NumericalError);
}

TEST_CASE("fit_line is translation invariant and rotation equivariant") {
  RngStream rng(4);
  CentroidMap c, shifted, rotated;
  const Sample shift = Sample::vector({3.0, -7.0});
  const double ct = std::cos(0.7), st = std::sin(0.7);
  for (double th : {0.0, 10.0, 20.0, 30.0}) {
    Sample p = Sample::vector({0.02 * th + 0.01 * rng.normal(), -0.01 * th + 0.01 * rng.normal()});
    c[th] = p;
    shifted[th] = lincomb(1.0, p, 1.0, shift);
    rotated[th] = Sample::vector({ct * p[0] - st * p[1], st * p[0] + ct * p[1]});
  }
  const TrajectoryFit f = fit_line(c), fs = fit_line(shifted), fr = fit_line(rotated);
  for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(f.direction[j] - fs.direction[j]) < 1e-12);
  CHECK(fr.direction[0] == doctest::Approx(ct * f.direction[0] - st * f.direction[1]).epsilon(1e-12));
  CHECK(fr.direction[1] == doctest::Approx(st * f.direction[0] + ct * f.direction[1]).epsilon(1e-12));
}

TEST_CASE("split directions recover each side of a planted model") {
  PlantedSpec spec = exact_spec();
  spec.noise_sd = 0.01;
  spec.n_records = 200;
  const PlantedModel m(spec);
  const auto records = m.generate();
  const FitPair pair = split_directions(records, identity, ladder(200));
  CHECK(pair.right.fit.thetas.front() == -40.0);
  CHECK(cosine(pair.left.fit.direction, m.u_pos()) >= 0.999);
  CHECK(cosine(pair.right.fit.direction, m.u_neg()) >= 0.999);
  CHECK(&select_fit(pair, 0, -20) == &pair.right.fit);
  CHECK(&select_fit(pair, 0, 20) == &pair.left.fit);
  CHECK(&select_fit(pair, -30, 0) == &pair.right.fit);
}

TEST_CASE("symmetric and mirrored planted models") {
  PlantedSpec spec = exact_spec();
  spec.mirror_consistent = true;
  const PlantedModel m(spec);
  const auto records = m.generate();
  const FitPair pair = split_directions(records, identity, ladder(2));
  std::vector<DatasetRecord> mirrored;
  for (const auto& r : records) mirrored.push_back(flip_record(r));
  const FitPair flipped = split_directions(mirrored, identity, ladder(2));
  // yaw changes sign under the flip, so per-degree directions pick up a minus sign
  for (const auto& [a, b] : {std::pair{&pair.left.fit, &flipped.right.fit}, std::pair{&pair.right.fit, &flipped.left.fit}}) {
    const Sample ma = mirror_sample(a->direction);
    for (std::size_t j = 0; j < ma.size(); ++j) CHECK(std::abs(ma[j] + b->direction[j]) < 1e-6);
  }

  // u_neg = -u_pos: displacement |yaw| u on both sides, so the two fits are anti-parallel
  const Sample a0 = Sample::vector({0.5, 0.2, -0.1}), u = Sample::vector({0.01, -0.02, 0.03});
  CentroidMap left, right;
  for (double th : {0.0, 10.0, 20.0, 30.0, 40.0}) {
    left[th] = lincomb(1.0, a0, th, u);
    right[-th] = lincomb(1.0, a0, th, u);
  }
  CHECK(cosine(fit_line(left).direction, fit_line(right).direction) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("traversal on exact planted dynamics") {
  const PlantedModel m(exact_spec());
  const FitPair pair = split_directions(m.generate(), identity, ladder(2));
  const YawProbeFn probe = [&](const Sample& x) { return m.estimate_yaw(x, {}, Light::Center); };
  TraversalConfig cfg;
  cfg.target_yaw = 30.0;
  cfg.n_steps = 3;
  const Sample src = m.mean_at(0.0, {}, Light::Center);
  const TraversalResult r = traverse(select_fit(pair, 0.0, 30.0), src, 0.0, cfg, identity, probe);
  REQUIRE(r.trail.size() == 3);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(*r.trail[k].measured_yaw - 10.0 * (k + 1)) < 1e-9);
  CHECK(r.complete);
  CHECK(r.verified);
  CHECK(r.extra_steps == 0);

  cfg.target_yaw = 0.0;
  cfg.n_steps = 1;
  const TraversalResult still = traverse(pair.left.fit, src, 0.0, cfg, identity, probe);
  CHECK(still.trail.size() == 1);
  CHECK(still.trail[0].latent == src);
}

TEST_CASE("extra steps and open loop") {
  const PlantedModel m(exact_spec());
  const FitPair pair = split_directions(m.generate(), identity, ladder(2));
  const Sample src = m.mean_at(0.0, {}, Light::Center);
  TraversalConfig cfg;
  cfg.target_yaw = 20.0;
  cfg.n_steps = 4;
  cfg.max_extra_steps = 3;
  // A probe that under-reports by far more than any extra step can recover.
  const YawProbeFn lagging = [&](const Sample& x) { return m.estimate_yaw(x, {}, Light::Center) - 50.0; };
  const TraversalResult r = traverse(pair.left.fit, src, 0.0, cfg, identity, lagging);
  CHECK(r.extra_steps == 3);
  CHECK(r.trail.size() == 7);
  CHECK(r.trail.back().extra);
  CHECK_FALSE(r.complete);

  const TraversalResult open = traverse(pair.left.fit, src, 0.0, cfg, identity, YawProbeFn{});
  CHECK(open.trail.size() == 4);
  CHECK_FALSE(open.verified);
  CHECK_FALSE(open.trail[0].measured_yaw.has_value());

  cfg.n_steps = 0;
  CHECK_THROWS_AS(traverse(pair.left.fit, src, 0.0, cfg, identity, lagging), ConfigError);
}

TEST_CASE("frontalize and rotate") {
  const PlantedModel m(exact_spec());
  const FitPair pair = split_directions(m.generate(), identity, ladder(2));
  const YawProbeFn probe = [&](const Sample& x) { return m.estimate_yaw(x, {}, Light::Center); };
  TraversalConfig cfg;
  cfg.target_yaw = 25.0;
  const Sample src = m.mean_at(-35.0, {}, Light::Center);
  const FrontalizeResult f = frontalize(pair, src, -35.0, cfg, identity, probe);
  CHECK(f.applied);
  CHECK(std::abs(f.yaw) <= cfg.yaw_tolerance);
  const FrontalizeResult again = frontalize(pair, f.latent, f.yaw, cfg, identity, probe);
  CHECK_FALSE(again.applied);
  CHECK(again.latent == f.latent);
  CHECK_FALSE(frontalize(pair, src, -15.0, cfg, identity, probe).applied);

  const TraversalResult r = rotate(pair, src, -35.0, cfg, identity, probe);
  CHECK(r.trail.size() == 8);
  CHECK(r.trail.front().phase == TrailPhase::Frontalize);
  CHECK(r.trail.back().phase == TrailPhase::Rotate);
  CHECK(std::abs(*r.trail.back().measured_yaw - 25.0) <= cfg.yaw_tolerance);
  CHECK(r.complete);
}

TEST_CASE("right then left returns to the start") {
  PlantedSpec spec = exact_spec();
  spec.noise_sd = 0.01;
  spec.n_records = 300;
  const PlantedModel m(spec);
  const FitPair pair = split_directions(m.generate(), identity, ladder(300));
  const Sample src = m.mean_at(0.0, {}, Light::Center);
  TraversalConfig out, back;
  out.target_yaw = -30.0;
  back.target_yaw = 0.0;
  const auto a = traverse(pair.right.fit, src, 0.0, out, identity, YawProbeFn{});
  const auto b = traverse(pair.right.fit, a.trail.back().latent, -30.0, back, identity, YawProbeFn{});
  CHECK(std::sqrt(squared_distance(b.trail.back().latent, src)) <= 10 * pair.right.fit.residual_rms + 1e-12);
}

TEST_CASE("slope cosine matrix") {
  TrajectoryFit a, b;
  a.direction = Sample::vector({1.0, 0.0});
  b.direction = Sample::vector({0.0, 1.0});
  const Matrix m = slope_cosine_matrix({a, b, a});
  CHECK(m[0][0] == 1.0);
  CHECK(std::abs(m[0][1]) < 1e-12);
  CHECK(m[0][2] == 1.0);
  CHECK(m[1][2] == m[2][1]);
  CHECK(matrix_csv(m, {"x", "y", "z,w"}).rfind("label,x,y,\"z,w\"\n", 0) == 0);
  const std::string pgm = matrix_heatmap_pgm(m, 2);
  CHECK(pgm.rfind("P5\n6 6\n255\n", 0) == 0);
  CHECK(static_cast<unsigned char>(pgm[11]) == 255);  // (0,0) = 1
  CHECK(static_cast<unsigned char>(pgm[11 + 2]) == 128);  // (0,1) = 0
  TrajectoryFit z;
  z.direction = Sample::vector({0.0, 0.0});
  CHECK_THROWS_AS(slope_cosine_matrix({a, z}), std::invalid_argument);
}

TEST_CASE("fit files round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "dtl_fit_test";
  std::filesystem::remove_all(dir);
  CentroidMap c{{0.0, Sample({2, 2}, 0.0)}, {10.0, Sample({2, 2}, 1.0)}, {20.0, Sample({2, 2}, 2.5)}};
  const TrajectoryFit f = fit_line(c);
  save_fit(f, dir, "left", {{"note", "x"}});
  const TrajectoryFit g = load_fit(dir, "left");
  CHECK(g.base == f.base);
  CHECK(g.direction == f.direction);
  CHECK(g.centroids == f.centroids);
  CHECK(g.thetas == f.thetas);
  CHECK(g.speed == f.speed);
  CHECK(g.residual_rms == f.residual_rms);
  std::filesystem::remove_all(dir);
}
