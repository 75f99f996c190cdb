#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "../src/pipeline/pipeline_internal.h"
#include "pipeline_fixtures.h"
#include "stackcount/carve.h"
#include "stackcount/pipeline.h"
#include "stackcount/render.h"
#include "stackcount/scenegen.h"
#include "stackcount/util.h"

using namespace stackcount;

namespace {

namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

template <typename Fn>
std::optional<errc> thrown_kind(Fn&& fn, std::string* msg = nullptr) {
  try {
    fn();
  } catch (const error& e) {
    if (msg) *msg = e.what();
    return e.kind();
  }
  return std::nullopt;
}

// Scene directories shared across cases: built lazily once, removed at exit.
fs::path shared_root() {
  static struct Root {
    fs::path path;
    Root() : path(fs::temp_directory_path() / "sc_pipeline_test") { fs::remove_all(path); }
    ~Root() {
      std::error_code ec;
      fs::remove_all(path, ec);
    }
  } root;
  return root.path;
}

// Small raster-packed scene, 6 views at 96px: cheap fodder for the scene-dir
// error paths.
struct TinyScene {
  std::string dir;
  SceneRecord record;
};

const TinyScene& tiny_scene() {
  static TinyScene t = [] {
    ContainerSpec c;
    c.interior = {0.5, 0.5, 0.4};
    FillOptions opt;
    opt.resolution = 50;
    opt.mode = FillMode::raster;
    FillResult fill = fill_container(c, box_mesh(0.1, 0.1, 0.1), 7, 0.6, opt);
    fill.record.scene_id = "tiny_000000";
    TinyScene s;
    s.dir = (shared_root() / "tiny").string();
    pipefix::write_scene_dir(s.dir, fill.record, 6, 96, 9);
    s.record = fill.record;
    return s;
  }();
  return t;
}

// The exact-packing scene (1000 objects, occupancy 1): the end-to-end count
// accuracy yardstick.
struct PackedScene {
  std::string dir;
  SceneRecord record;
};

const PackedScene& packed_scene() {
  static PackedScene p = [] {
    PackedScene s;
    s.dir = (shared_root() / "packed").string();
    s.record = pipefix::write_packed_fixture_dir(s.dir);
    return s;
  }();
  return p;
}

// A small generated dataset plus one trained model directory, shared by the
// training, evaluation, ablation and border cases.
struct SmallDataset {
  std::string dir;
  DatasetSummary summary;
};

const SmallDataset& small_dataset() {
  static SmallDataset d = [] {
    DatasetConfig cfg;
    cfg.out_dir = (shared_root() / "dataset").string();
    cfg.scenes = 30;
    cfg.master_seed = 11;
    cfg.families = {ShapeFamily::box, ShapeFamily::sphere};
    cfg.shape_seeds_per_family = 3;
    cfg.holdout_fraction = 0.34;
    cfg.interior_lo = {0.3, 0.3, 0.25};
    cfg.interior_hi = {0.35, 0.35, 0.3};
    cfg.settle_resolution = 48;
    cfg.views = 8;
    cfg.image_size = 96;
    cfg.probe_size = 64;
    SmallDataset s;
    s.summary = dataset_generate(cfg);
    s.dir = cfg.out_dir;
    return s;
  }();
  return d;
}

struct TrainedModel {
  TrainSummary summary;
  std::string out_dir;
};

const TrainedModel& trained_model() {
  static TrainedModel m = [] {
    TrainedModel t;
    t.out_dir = (shared_root() / "model").string();
    TrainOptions opt;
    opt.out_dir = t.out_dir;
    opt.hyper.epochs = 12;
    opt.hyper.seed = 3;
    t.summary = train_pipeline(small_dataset().dir, opt);
    return t;
  }();
  return m;
}

}  // namespace

TEST_CASE("count_objects: counting rule and half-even tie rounding") {
  CountResult r = count_objects(0.5, 2.0, 0.01);
  CHECK(r.n_est == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(r.n_rounded == 100);
  CHECK(r.gamma_used == 0.5);
  CHECK(r.volume_used == 2.0);
  CHECK(r.unit_volume_used == 0.01);

  CHECK(count_objects(0.323, 1.0, 1.25e-4).n_rounded == 2584);
  CHECK(count_objects(1.0, 1.0, 1e-3).n_rounded == 1000);
  CHECK(count_objects(0.0, 1.0, 1e-3).n_rounded == 0);

  // Ties round to the even neighbor in both directions.
  CHECK(count_objects(1.0, 0.5, 1.0).n_rounded == 0);
  CHECK(count_objects(1.0, 1.5, 1.0).n_rounded == 2);
  CHECK(count_objects(1.0, 2.5, 1.0).n_rounded == 2);
  CHECK(count_objects(1.0, 3.5, 1.0).n_rounded == 4);
}

TEST_CASE("count_objects: scale invariance in the volume pair") {
  CountResult base = count_objects(0.37, 0.81, 2.9e-4);
  // Power-of-two scales commute with the division exactly.
  for (double s : {0.0009765625, 0.25, 0.5, 2.0, 4.0, 1024.0}) {
    CountResult r = count_objects(0.37, 0.81 * s, 2.9e-4 * s);
    CHECK(r.n_est == base.n_est);
    CHECK(r.n_rounded == base.n_rounded);
  }
  Rng rng(17);
  for (int i = 0; i < 64; ++i) {
    double s = rng.uniform(0.05, 20.0);
    CountResult r = count_objects(0.37, 0.81 * s, 2.9e-4 * s);
    CHECK(r.n_est == doctest::Approx(base.n_est).epsilon(1e-12));
    CHECK(r.n_rounded == base.n_rounded);
  }
}

TEST_CASE("count_objects: rejected domains") {
  CHECK_THROWS_AS(count_objects(0.5, 1.0, 0.0), error);
  CHECK_THROWS_AS(count_objects(0.5, 1.0, -1e-6), error);
  CHECK_THROWS_AS(count_objects(0.5, -1e-9, 1.0), error);
  CHECK_THROWS_AS(count_objects(-0.1, 1.0, 1.0), error);
  CHECK_THROWS_AS(count_objects(1.0 + 1e-9, 1.0, 1.0), error);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK(thrown_kind([&] { count_objects(nan, 1.0, 1.0); }) == errc::numeric);
  CHECK(thrown_kind([&] { count_objects(0.5, nan, 1.0); }) == errc::numeric);
  CHECK(thrown_kind([&] { count_objects(0.5, 1.0, nan); }) == errc::numeric);
}

TEST_CASE("count metrics: worked values are exact") {
  std::vector<std::pair<double, double>> p{{100.0, 150.0}};
  CHECK(metric_nae(p) == 0.5);
  CHECK(metric_sre(p) == 0.25);
  CHECK(metric_mae(p) == 50.0);
  CHECK(metric_smape(p) == 40.0);

  std::vector<std::pair<double, double>> perfect{{100.0, 100.0}, {7.0, 7.0}};
  CHECK(metric_nae(perfect) == 0.0);
  CHECK(metric_sre(perfect) == 0.0);
  CHECK(metric_mae(perfect) == 0.0);
  CHECK(metric_smape(perfect) == 0.0);

  std::vector<std::pair<double, double>> two{{100.0, 150.0}, {1000.0, 1000.0}};
  CHECK(metric_nae(two) == 50.0 / 1100.0);
  CHECK(metric_mae(two) == 25.0);
}

TEST_CASE("count metrics: NAE equals MAE * n / total truth") {
  Rng rng(23);
  auto draw = [&](int n) {
    std::vector<std::pair<double, double>> p;
    for (int i = 0; i < n; ++i) {
      double y = double(50 + int(rng.below(100)));
      p.emplace_back(y, y + rng.uniform(-20.0, 20.0));
    }
    return p;
  };
  auto total = [](const std::vector<std::pair<double, double>>& p) {
    double t = 0;
    for (const auto& [y, e] : p) t += y;
    return t;
  };
  // Bitwise for a power-of-two count (the mean's divide is exact there).
  auto p8 = draw(8);
  CHECK(metric_nae(p8) == metric_mae(p8) * 8.0 / total(p8));
  auto p7 = draw(7);
  CHECK(metric_nae(p7) == doctest::Approx(metric_mae(p7) * 7.0 / total(p7)).epsilon(1e-15));
}

TEST_CASE("count metrics: domain checks") {
  std::vector<std::pair<double, double>> empty;
  CHECK_THROWS_AS(metric_nae(empty), error);
  CHECK_THROWS_AS(metric_sre(empty), error);
  CHECK_THROWS_AS(metric_mae(empty), error);
  CHECK_THROWS_AS(metric_smape(empty), error);
  CHECK_THROWS_AS(metric_r2(empty), error);

  // The normalized metrics need strictly positive truths; plain MAE does not.
  std::vector<std::pair<double, double>> zero_truth{{0.0, 5.0}, {10.0, 10.0}};
  CHECK(thrown_kind([&] { metric_nae(zero_truth); }) == errc::numeric);
  CHECK(thrown_kind([&] { metric_sre(zero_truth); }) == errc::numeric);
  CHECK(thrown_kind([&] { metric_smape(zero_truth); }) == errc::numeric);
  CHECK(metric_mae(zero_truth) == 2.5);

  std::vector<std::pair<double, double>> nan_est{{10.0, std::numeric_limits<double>::quiet_NaN()}};
  CHECK(thrown_kind([&] { metric_mae(nan_est); }) == errc::numeric);
}

TEST_CASE("metric_r2: perfect, constant-mean and inverted predictors") {
  std::vector<std::pair<double, double>> perfect{{1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}};
  CHECK(metric_r2(perfect) == 1.0);
  std::vector<std::pair<double, double>> at_mean{{1.0, 2.0}, {2.0, 2.0}, {3.0, 2.0}};
  CHECK(metric_r2(at_mean) == 0.0);
  std::vector<std::pair<double, double>> inverted{{1.0, 3.0}, {2.0, 2.0}, {3.0, 1.0}};
  CHECK(metric_r2(inverted) == -3.0);

  std::vector<std::pair<double, double>> single{{1.0, 1.0}};
  CHECK(thrown_kind([&] { metric_r2(single); }) == errc::numeric);
  std::vector<std::pair<double, double>> flat{{2.0, 1.0}, {2.0, 3.0}};
  CHECK(thrown_kind([&] { metric_r2(flat); }) == errc::numeric);
}

TEST_CASE("report_from_rows: sorted fold, rounded counts, idempotent rebuild") {
  std::vector<SceneRow> rows;
  Rng rng(31);
  for (int i = 0; i < 12; ++i) {
    SceneRow r;
    char id[32];
    std::snprintf(id, sizeof id, "scene_%06d", i);
    r.scene_id = id;
    r.shape_id = "box:1";
    r.n_gt = 80 + int(rng.below(200));
    r.gamma_gt = rng.uniform(0.2, 0.9);
    r.gamma_est = r.gamma_gt + rng.uniform(-0.1, 0.1);
    r.n_est = double(r.n_gt) + rng.uniform(-25.0, 25.0);
    r.n_rounded = std::llround(r.n_est);
    r.volume_est = rng.uniform(0.1, 0.5);
    r.unit_volume = 1e-4;
    r.complexity = rng.uniform(0.0, 2.0);
    rows.push_back(r);
  }

  MetricsReport a = report_from_rows(EstimatorId::mean, rows);
  std::vector<SceneRow> shuffled = rows;
  for (size_t i = shuffled.size(); i > 1; --i)
    std::swap(shuffled[i - 1], shuffled[size_t(rng.below(i))]);
  MetricsReport b = report_from_rows(EstimatorId::mean, shuffled);

  CHECK(b.nae == a.nae);
  CHECK(b.sre == a.sre);
  CHECK(b.mae == a.mae);
  CHECK(b.smape == a.smape);
  CHECK(b.r2 == a.r2);
  REQUIRE(b.rows.size() == rows.size());
  CHECK(std::is_sorted(b.rows.begin(), b.rows.end(),
                       [](const SceneRow& x, const SceneRow& y) { return x.scene_id < y.scene_id; }));

  // A report rebuilt from its own rows reproduces the aggregates bit for bit.
  MetricsReport again = report_from_rows(a.estimator_id, a.rows);
  CHECK(again.nae == a.nae);
  CHECK(again.sre == a.sre);
  CHECK(again.mae == a.mae);
  CHECK(again.smape == a.smape);
  CHECK(again.r2 == a.r2);

  // Count metrics run on the rounded integers, not the real-valued estimates.
  std::vector<SceneRow> pin(2);
  pin[0].scene_id = "a";
  pin[0].n_gt = 100;
  pin[0].n_est = 149.6;
  pin[0].n_rounded = 150;
  pin[0].gamma_gt = 0.4;
  pin[0].gamma_est = 0.4;
  pin[1].scene_id = "b";
  pin[1].n_gt = 100;
  pin[1].n_est = 50.4;
  pin[1].n_rounded = 50;
  pin[1].gamma_gt = 0.6;
  pin[1].gamma_est = 0.6;
  MetricsReport pinned = report_from_rows(EstimatorId::regressor, pin);
  CHECK(pinned.estimator_id == EstimatorId::regressor);
  CHECK(pinned.n_scenes == 2);
  CHECK(pinned.nae == 0.5);
  CHECK(pinned.mae == 50.0);
  CHECK(pinned.r2 == 1.0);
}

TEST_CASE("estimator store: round-trip and malformed files") {
  fs::path dir = shared_root() / "est_store";
  std::string path = (dir / "estimators.json").string();
  TrainedEstimators e;
  e.mean_gamma = 0.42;
  e.corrector = {1.1, -0.05};
  save_estimators(path, e);
  TrainedEstimators r = load_estimators(path);
  CHECK(r.mean_gamma == 0.42);
  CHECK(r.corrector.a == 1.1);
  CHECK(r.corrector.b == -0.05);

  CHECK(thrown_kind([&] { load_estimators((dir / "absent.json").string()); }) ==
        errc::missing_input);
  write_file((dir / "broken.json").string(), "{not json");
  CHECK(thrown_kind([&] { load_estimators((dir / "broken.json").string()); }) == errc::config);
  write_file((dir / "partial.json").string(), R"({"schema_version":1,"mean_gamma":0.4})");
  CHECK(thrown_kind([&] { load_estimators((dir / "partial.json").string()); }) == errc::config);
}

TEST_CASE("degrade_depth: exact identity, mask-safe blur, seeded noise") {
  DepthMap d(16, 12);
  Rng rng(41);
  for (int v = 0; v < d.height; ++v)
    for (int u = 0; u < d.width; ++u)
      if ((u + v) % 5 != 0) d.at(u, v) = float(2.0 + 0.05 * u + 0.02 * v + 0.1 * rng.uniform());

  DepthMap zero = d;
  pipe::degrade_depth(zero, {}, 99);
  CHECK(std::memcmp(zero.depths.data(), d.depths.data(), d.depths.size() * sizeof(float)) == 0);

  DepthDegrade blur;
  blur.blur_sigma_px = 1.5;
  DepthMap blurred = d;
  pipe::degrade_depth(blurred, blur, 99);
  for (size_t i = 0; i < d.depths.size(); ++i) {
    CHECK(std::isfinite(blurred.depths[i]) == std::isfinite(d.depths[i]));
    if (std::isfinite(d.depths[i])) {
      CHECK(blurred.depths[i] > 0.0f);
      CHECK(blurred.depths[i] >= 1.9f);
      CHECK(blurred.depths[i] <= 3.6f);
    }
  }

  // A constant field with holes blurs to itself: border renormalization keeps
  // no-hit pixels from bleeding in.
  DepthMap flat(16, 12, 3.0f);
  flat.at(3, 4) = kNoHit;
  flat.at(9, 7) = kNoHit;
  DepthMap flat_b = flat;
  pipe::degrade_depth(flat_b, blur, 99);
  for (size_t i = 0; i < flat.depths.size(); ++i) {
    if (std::isfinite(flat.depths[i]))
      CHECK(flat_b.depths[i] == doctest::Approx(3.0f).epsilon(1e-5));
    else
      CHECK(!std::isfinite(flat_b.depths[i]));
  }

  DepthDegrade noise;
  noise.noise_rel = 0.1;
  DepthMap n1 = d, n2 = d, n3 = d;
  pipe::degrade_depth(n1, noise, 7);
  pipe::degrade_depth(n2, noise, 7);
  CHECK(std::memcmp(n1.depths.data(), n2.depths.data(), d.depths.size() * sizeof(float)) == 0);
  pipe::degrade_depth(n3, noise, 8);
  CHECK(std::memcmp(n1.depths.data(), n3.depths.data(), d.depths.size() * sizeof(float)) != 0);
  bool changed = false;
  for (size_t i = 0; i < d.depths.size(); ++i) {
    CHECK(std::isfinite(n1.depths[i]) == std::isfinite(d.depths[i]));
    if (std::isfinite(d.depths[i])) {
      CHECK(n1.depths[i] > 0.0f);
      changed = changed || n1.depths[i] != d.depths[i];
    }
  }
  CHECK(changed);
}

TEST_CASE("occupancy estimate sees container pixels: flush pack reads above partial fill") {
  ContainerSpec c;
  c.interior = {0.5, 0.5, 0.5};
  FillOptions opt;
  opt.resolution = 50;
  opt.mode = FillMode::raster;
  TriMesh cube = box_mesh(0.1, 0.1, 0.1);
  FillResult full = fill_container(c, cube, 3, 1.0, opt);
  FillResult part = fill_container(c, cube, 3, 0.4, opt);
  REQUIRE(full.record.n_objects > part.record.n_objects);

  auto gamma_of = [](const FillResult& fr) {
    LabeledScene scene = realize_scene(fr);
    AABB b = scene.cells.bounds();
    ViewRingOptions vo;
    vo.width = 128;
    vo.height = 128;
    vo.scene_radius = 0.5 * b.diagonal();
    std::vector<Camera> cams =
        make_view_ring(1, 2.2 * vo.scene_radius, b.center(), 75.0, 80.0, 21, vo);
    ViewRender r = render_view(scene, cams[0]);
    return pipe::estimate_gamma(EstimatorId::depth_extrapolated, {}, r.depth, r.object_mask,
                                r.container_mask);
  };
  double g_full = gamma_of(full);
  double g_part = gamma_of(part);
  CHECK(g_full > 0.85);
  CHECK(g_full <= 1.0);
  CHECK(g_part > 0.0);
  CHECK(g_part <= 1.0);
  // The container rim sits nearer the camera than a low stack, so a partial
  // fill must read strictly below a flush one.
  CHECK(g_full > g_part + 0.02);
}

TEST_CASE("run_scene: exact-packing scene, persisted decomposition, override paths") {
  const PackedScene& fx = packed_scene();
  REQUIRE(fx.record.n_objects == 1000);
  REQUIRE(fx.record.gamma_gt == 1.0);

  PipelineConfig cfg;
  cfg.gamma_override = 1.0;
  CountResult carved = run_scene(fx.dir, EstimatorId::depth_extrapolated, cfg);
  CHECK(carved.gamma_used == 1.0);
  CHECK(carved.unit_volume_used == fx.record.unit_volume);
  CHECK(carved.volume_used > 0.9);
  CHECK(carved.volume_used < 1.1);
  CHECK(std::llabs(carved.n_rounded - 1000) <= 50);  // carving alone stays within 5%

  // The (gamma, volume, unit volume, count) decomposition lands next to the
  // scene for audit, along with the carved grid.
  fs::path audit = fs::path(fx.dir) / "pipeline";
  REQUIRE(fs::exists(audit / "result.json"));
  REQUIRE(fs::exists(audit / "carved.vox"));
  auto j = nlohmann::json::parse(slurp((audit / "result.json").string()));
  CHECK(j["gamma_est"].get<double>() == 1.0);
  CHECK(j["n_rounded"].get<long long>() == carved.n_rounded);
  CHECK(j["volume_est"].get<double>() == doctest::Approx(carved.volume_used).epsilon(1e-12));
  CHECK(j["unit_volume"].get<double>() == doctest::Approx(carved.unit_volume_used).epsilon(1e-12));
  double t_used = j["thickness_used"].get<double>();
  CHECK(t_used > 0.02);
  CHECK(t_used < 0.06);
  VoxelGrid grid = load_voxels((audit / "carved.vox").string());
  CHECK(grid_volume(grid).volume == doctest::Approx(carved.volume_used).epsilon(1e-12));

  // Depth-extrapolated occupancy on the same carved volume: a flush pack reads
  // near 1, so the count stays within a tenth.
  PipelineConfig reuse;
  reuse.volume_override = carved.volume_used;
  reuse.persist = false;
  CountResult de = run_scene(fx.dir, EstimatorId::depth_extrapolated, reuse);
  CHECK(de.gamma_used > 0.9);
  CHECK(de.gamma_used <= 1.0);
  CHECK(std::llabs(de.n_rounded - 1000) <= 100);

  // Full ground-truth injection reproduces the exact count.
  PipelineConfig exact;
  exact.gamma_override = 1.0;
  exact.volume_override = 1000.0 * fx.record.unit_volume;
  exact.unit_volume_override = fx.record.unit_volume;
  exact.persist = false;
  CountResult gt = run_scene(fx.dir, EstimatorId::depth_extrapolated, exact);
  CHECK(gt.n_est == doctest::Approx(1000.0).epsilon(1e-12));
  CHECK(gt.n_rounded == 1000);
}

TEST_CASE("run_scene: a scene with no object pixels counts zero") {
  SceneRecord rec = tiny_scene().record;
  rec.scene_id = "tiny_empty";
  rec.n_objects = 0;
  rec.placements.clear();
  rec.gamma_gt = 0.0;
  rec.gamma_no_edges = 0.0;
  rec.gamma_full = 0.0;
  rec.fill_fraction = 0.0;
  std::string dir = (shared_root() / "tiny_empty").string();
  pipefix::write_scene_dir(dir, rec, 6, 96, 9);

  CountResult r = run_scene(dir, EstimatorId::depth_extrapolated);
  CHECK(r.n_est == 0.0);
  CHECK(r.n_rounded == 0);
}

TEST_CASE("run_scene: missing artifacts are enumerated; model directory contract") {
  const TinyScene& tiny = tiny_scene();

  std::string broken = (shared_root() / "tiny_broken").string();
  fs::copy(tiny.dir, broken, fs::copy_options::recursive);
  fs::remove(fs::path(broken) / "manifest.json");
  fs::remove(fs::path(broken) / "depth_003.pfm");
  fs::remove(fs::path(broken) / "mask_obj_005.pgm");
  std::string msg;
  auto kind = thrown_kind([&] { run_scene(broken, EstimatorId::depth_extrapolated); }, &msg);
  REQUIRE(kind.has_value());
  CHECK(*kind == errc::missing_input);
  CHECK(msg.find("manifest.json") != std::string::npos);
  CHECK(msg.find("depth_003.pfm") != std::string::npos);
  CHECK(msg.find("mask_obj_005.pgm") != std::string::npos);

  CHECK(thrown_kind([&] { run_scene((shared_root() / "no_such_scene").string(),
                                    EstimatorId::depth_extrapolated); }) == errc::missing_input);

  // The learned estimator requires a model directory holding stored weights;
  // the fitted baselines require the estimator store.
  CHECK(thrown_kind([&] { run_scene(tiny.dir, EstimatorId::regressor); }) == errc::config);
  PipelineConfig mc;
  mc.model_dir = (shared_root() / "empty_model").string();
  mc.persist = false;
  fs::create_directories(mc.model_dir);
  std::string msg2;
  auto kind2 = thrown_kind([&] { run_scene(tiny.dir, EstimatorId::regressor, mc); }, &msg2);
  REQUIRE(kind2.has_value());
  CHECK(*kind2 == errc::missing_input);
  CHECK(msg2.find("params.occ1") != std::string::npos);
  std::string msg3;
  auto kind3 = thrown_kind([&] { run_scene(tiny.dir, EstimatorId::mean, mc); }, &msg3);
  REQUIRE(kind3.has_value());
  CHECK(*kind3 == errc::missing_input);
  CHECK(msg3.find("estimators.json") != std::string::npos);

  PipelineConfig bad_res;
  bad_res.carve_resolution = 4;
  CHECK(thrown_kind([&] { run_scene(tiny.dir, EstimatorId::depth_extrapolated, bad_res); }) ==
        errc::config);
}

TEST_CASE("train_pipeline: artifacts, determinism across runs and thread counts") {
  const SmallDataset& ds = small_dataset();
  REQUIRE(ds.summary.n_train > 0);
  REQUIRE(ds.summary.n_val > 0);

  const TrainedModel& tm = trained_model();
  CHECK(tm.summary.n_train == ds.summary.n_train);
  CHECK(tm.summary.n_val == ds.summary.n_val);
  CHECK(tm.summary.n_calibration == 16);
  CHECK(tm.summary.mean_gamma > 0.0);
  CHECK(tm.summary.mean_gamma < 1.0);
  CHECK(std::isfinite(tm.summary.best_val_mse));
  CHECK(tm.summary.best_val_mse >= 0.0);
  CHECK(tm.summary.params_crc != 0);
  for (const char* f : {"params.occ1", "estimators.json", "train_log.csv"})
    CHECK(fs::exists(fs::path(tm.out_dir) / f));

  TrainedEstimators stored = load_estimators((fs::path(tm.out_dir) / "estimators.json").string());
  CHECK(stored.mean_gamma == tm.summary.mean_gamma);

  // Re-training with more worker threads produces byte-identical artifacts.
  int prev = default_threads();
  set_default_threads(3);
  TrainOptions opt2;
  opt2.out_dir = (shared_root() / "model_threads").string();
  opt2.hyper.epochs = 12;
  opt2.hyper.seed = 3;
  TrainSummary s2 = train_pipeline(ds.dir, opt2);
  set_default_threads(prev);
  CHECK(s2.params_crc == tm.summary.params_crc);
  CHECK(slurp((fs::path(opt2.out_dir) / "params.occ1").string()) ==
        slurp((fs::path(tm.out_dir) / "params.occ1").string()));
  CHECK(slurp((fs::path(opt2.out_dir) / "estimators.json").string()) ==
        slurp((fs::path(tm.out_dir) / "estimators.json").string()));
}

TEST_CASE("evaluate: per-estimator reports, complexity bins, output files") {
  const SmallDataset& ds = small_dataset();
  const TrainedModel& tm = trained_model();

  EvaluateOptions opt;
  opt.carve_resolution = 64;
  opt.model_dir = tm.out_dir;
  opt.out_dir = (shared_root() / "eval_out").string();
  opt.scatter_svg = true;
  EvaluateResult res = evaluate(ds.dir, opt);
  REQUIRE(res.reports.size() == 4);
  REQUIRE(res.complexity.size() == 4);

  const int n_val = ds.summary.n_val;
  for (const MetricsReport& rep : res.reports) {
    CHECK(rep.n_scenes == n_val);
    CHECK(int(rep.rows.size()) == n_val);
    CHECK(std::is_sorted(rep.rows.begin(), rep.rows.end(), [](const SceneRow& x, const SceneRow& y) {
      return x.scene_id < y.scene_id;
    }));
    for (const SceneRow& r : rep.rows) {
      CHECK(r.gamma_est >= 0.0);
      CHECK(r.gamma_est <= 1.0);
      CHECK(r.n_rounded >= 0);
      CHECK(r.unit_volume > 0.0);
      CHECK(r.volume_est > 0.0);
      CHECK(r.n_gt > 0);
    }
  }

  // The constant baseline repeats the training mean everywhere and cannot
  // beat the held-out mean in explained variance.
  const MetricsReport& mean_rep = res.reports[0];
  CHECK(mean_rep.estimator_id == EstimatorId::mean);
  for (const SceneRow& r : mean_rep.rows) CHECK(r.gamma_est == tm.summary.mean_gamma);
  CHECK(mean_rep.r2 <= 1e-12);

  for (size_t e = 0; e < res.complexity.size(); ++e) {
    int total = 0;
    for (const ComplexityBin& b : res.complexity[e]) {
      CHECK(b.lo <= b.hi + 1e-12);
      CHECK(b.mean_abs_gamma_error >= 0.0);
      CHECK(b.count >= 0);
      total += b.count;
    }
    CHECK(total == n_val);
  }

  for (const char* f :
       {"report_mean.csv", "report_mean.json", "report_depth_extrapolated.csv",
        "report_depth_extrapolated.json", "report_depth_corrected.csv",
        "report_depth_corrected.json", "report_regressor.csv", "report_regressor.json",
        "summary.json", "scatter_mean.svg", "scatter_regressor.svg"})
    CHECK(fs::exists(fs::path(opt.out_dir) / f));

  // CSV: one header plus one line per validation scene.
  std::string csv = slurp((fs::path(opt.out_dir) / "report_mean.csv").string());
  CHECK(int(std::count(csv.begin(), csv.end(), '\n')) == n_val + 1);

  auto summary = nlohmann::json::parse(slurp((fs::path(opt.out_dir) / "summary.json").string()));
  CHECK(summary["estimators"].size() == 4);
  CHECK(summary["carve_resolution"].get<int>() == 64);
  CHECK(summary["n_val"].get<int>() == n_val);
}

TEST_CASE("evaluate and train refuse shape leakage and single-split datasets") {
  fs::path dir = shared_root() / "leaky";
  write_file((dir / "dataset.json").string(),
             R"({"schema_version":1,"master_seed":1,"kappa0":1.0,"families":["box"],)"
             R"("shape_seeds_per_family":1,"views":4,"image_size":64})");
  write_file(
      (dir / "index.ndjson").string(),
      R"({"scene_id":"scene_000000","dir":"scenes/scene_000000","shape_id":"box:1","split":"train","n_objects":10,"gamma_gt":0.5,"key_view":0})"
      "\n"
      R"({"scene_id":"scene_000001","dir":"scenes/scene_000001","shape_id":"box:1","split":"val","n_objects":10,"gamma_gt":0.5,"key_view":0})"
      "\n");
  std::string msg;
  auto kind = thrown_kind([&] { evaluate(dir.string(), {}); }, &msg);
  REQUIRE(kind.has_value());
  CHECK(*kind == errc::config);
  CHECK(msg.find("box:1") != std::string::npos);
  TrainOptions topt;
  topt.out_dir = (dir / "model").string();
  CHECK(thrown_kind([&] { train_pipeline(dir.string(), topt); }) == errc::config);

  fs::path solo = shared_root() / "train_only";
  write_file((solo / "dataset.json").string(), slurp((dir / "dataset.json").string()));
  write_file(
      (solo / "index.ndjson").string(),
      R"({"scene_id":"scene_000000","dir":"scenes/scene_000000","shape_id":"box:1","split":"train","n_objects":10,"gamma_gt":0.5,"key_view":0})"
      "\n");
  CHECK(thrown_kind([&] { evaluate(solo.string(), {}); }) == errc::config);
  TrainOptions topt2;
  topt2.out_dir = (solo / "model").string();
  CHECK(thrown_kind([&] { train_pipeline(solo.string(), topt2); }) == errc::config);
}

TEST_CASE("border_report: slab and core occupancy means over the dataset") {
  const SmallDataset& ds = small_dataset();
  BorderReport br = border_report(ds.dir);
  CHECK(br.n_scenes == 30);
  CHECK(br.mean_gamma_with > 0.0);
  CHECK(br.mean_gamma_with <= 1.0);
  CHECK(br.mean_gamma_no > 0.0);
  CHECK(br.mean_gamma_no <= 1.0);
  CHECK(br.delta == doctest::Approx(std::fabs(br.mean_gamma_with - br.mean_gamma_no)));
  CHECK(br.delta < 0.25);
}

TEST_CASE("depth_source_ablation: zero degradation collapses the grid") {
  const SmallDataset& ds = small_dataset();

  AblationOptions zero;
  zero.hyper.epochs = 6;
  zero.hyper.seed = 5;
  zero.out_dir = (shared_root() / "ablation_out").string();
  AblationResult rz = depth_source_ablation(ds.dir, zero);

  CHECK(rz.cells[0].degraded_train == false);
  CHECK(rz.cells[0].degraded_eval == false);
  CHECK(rz.cells[1].degraded_train == false);
  CHECK(rz.cells[1].degraded_eval == true);
  CHECK(rz.cells[2].degraded_train == true);
  CHECK(rz.cells[2].degraded_eval == false);
  CHECK(rz.cells[3].degraded_train == true);
  CHECK(rz.cells[3].degraded_eval == true);

  const MetricsReport& base = rz.cells[0].report;
  CHECK(base.n_scenes == ds.summary.n_val);
  for (size_t i = 1; i < 4; ++i) {
    const MetricsReport& rep = rz.cells[i].report;
    CHECK(rep.nae == base.nae);
    CHECK(rep.sre == base.sre);
    CHECK(rep.mae == base.mae);
    CHECK(rep.smape == base.smape);
    CHECK(rep.r2 == base.r2);
    REQUIRE(rep.rows.size() == base.rows.size());
    for (size_t k = 0; k < rep.rows.size(); ++k)
      CHECK(rep.rows[k].gamma_est == base.rows[k].gamma_est);
  }

  // Volumes come from ground truth here, so each estimate decomposes exactly.
  for (const SceneRow& r : base.rows) {
    CHECK(r.volume_est > 0.0);
    CHECK(r.n_est == doctest::Approx(r.gamma_est * r.volume_est / r.unit_volume).epsilon(1e-12));
  }

  REQUIRE(fs::exists(fs::path(zero.out_dir) / "ablation.json"));
  auto aj = nlohmann::json::parse(slurp((fs::path(zero.out_dir) / "ablation.json").string()));
  REQUIRE(aj["cells"].size() == 4);
  CHECK(aj["cells"][0]["train"].get<std::string>() == "clean");
  CHECK(aj["cells"][0]["eval"].get<std::string>() == "clean");
  CHECK(aj["cells"][3]["train"].get<std::string>() == "degraded");
  CHECK(aj["cells"][3]["eval"].get<std::string>() == "degraded");
}

TEST_CASE("depth_source_ablation: degrading the evaluation depths moves the estimates") {
  const SmallDataset& ds = small_dataset();

  AblationOptions noisy;
  noisy.hyper.epochs = 6;
  noisy.hyper.seed = 5;
  noisy.degrade.noise_rel = 0.1;
  noisy.degrade.blur_sigma_px = 2.0;
  noisy.degrade.seed = 77;
  AblationResult rn = depth_source_ablation(ds.dir, noisy);

  AblationOptions zero;
  zero.hyper.epochs = 6;
  zero.hyper.seed = 5;
  AblationResult rz = depth_source_ablation(ds.dir, zero);

  // The clean-trained, clean-evaluated cell ignores the degradation knobs.
  CHECK(rn.cells[0].report.nae == rz.cells[0].report.nae);
  CHECK(rn.cells[0].report.r2 == rz.cells[0].report.r2);

  // Degrading only the evaluation inputs changes at least one estimate.
  bool moved = false;
  REQUIRE(rn.cells[1].report.rows.size() == rn.cells[0].report.rows.size());
  for (size_t k = 0; k < rn.cells[1].report.rows.size(); ++k)
    moved = moved || rn.cells[1].report.rows[k].gamma_est != rn.cells[0].report.rows[k].gamma_est;
  CHECK(moved);
}
