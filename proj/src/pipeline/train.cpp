#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pipeline_internal.h"

namespace stackcount {
namespace pipe {

void degrade_depth(DepthMap& depth, const DepthDegrade& degrade, uint64_t stream) {
  if (degrade.blur_sigma_px > 0) {
    double sigma = degrade.blur_sigma_px;
    int radius = int(std::ceil(3.0 * sigma));
    std::vector<double> w(size_t(radius) + 1);
    for (int k = 0; k <= radius; ++k) w[size_t(k)] = std::exp(-0.5 * double(k) * double(k) / (sigma * sigma));

    // Two renormalized passes; no-hit pixels neither spread nor change.
    DepthMap tmp = depth;
    for (int v = 0; v < depth.height; ++v)
      for (int u = 0; u < depth.width; ++u) {
        if (!std::isfinite(depth.at(u, v))) continue;
        double acc = 0, wsum = 0;
        for (int k = -radius; k <= radius; ++k) {
          int x = u + k;
          if (x < 0 || x >= depth.width) continue;
          float d = depth.at(x, v);
          if (!std::isfinite(d)) continue;
          acc += w[size_t(std::abs(k))] * d;
          wsum += w[size_t(std::abs(k))];
        }
        tmp.at(u, v) = float(acc / wsum);
      }
    for (int v = 0; v < depth.height; ++v)
      for (int u = 0; u < depth.width; ++u) {
        if (!std::isfinite(tmp.at(u, v))) continue;
        double acc = 0, wsum = 0;
        for (int k = -radius; k <= radius; ++k) {
          int y = v + k;
          if (y < 0 || y >= depth.height) continue;
          float d = tmp.at(u, y);
          if (!std::isfinite(d)) continue;
          acc += w[size_t(std::abs(k))] * d;
          wsum += w[size_t(std::abs(k))];
        }
        depth.at(u, v) = float(acc / wsum);
      }
  }
  if (degrade.noise_rel > 0) {
    Rng rng(stream);
    for (float& d : depth.depths) {
      if (!std::isfinite(d)) continue;
      float noisy = d * float(1.0 + degrade.noise_rel * rng.normal());
      d = std::max(noisy, 0.01f * d);  // depth readings stay positive
    }
  }
}

namespace {

// Exact-packing raster fills of 0.1-cubes at assorted container sizes: flat
// or terraced tops whose occupancy sits at the dense end the random-drop
// scenes never reach.
std::vector<TrainSample> calibration_samples(int count, int image_size, uint64_t seed) {
  constexpr double kSides[] = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  constexpr double kFills[] = {0.5, 0.75, 1.0};
  constexpr int kViews = 6;

  std::vector<TrainSample> out(static_cast<size_t>(count));
  parallel_for(count, default_threads(), [&](int64_t lo, int64_t hi) {
    for (int64_t k = lo; k < hi; ++k) {
      Rng rng(Rng::stream(seed, uint64_t(k)));
      auto side = [&] { return kSides[rng.below(std::size(kSides))]; };

      ContainerSpec c;
      c.interior = {side(), side(), side()};
      c.wall_thickness_ratio = 0.04;
      double fill = kFills[rng.below(std::size(kFills))];
      uint64_t fill_seed = rng.u64();
      uint64_t ring_seed = rng.u64();

      FillOptions fo;
      fo.mode = FillMode::raster;
      double longest = std::max(c.interior.x, std::max(c.interior.y, c.interior.z));
      fo.resolution = int(std::lround(longest * 100.0));  // exact 0.01 settle cells
      FillResult fr = fill_container(c, box_mesh(0.1, 0.1, 0.1), fill_seed, fill, fo);

      LabeledScene scene = realize_scene(fr);
      AABB b = scene.cells.bounds();
      ViewRingOptions vo;
      vo.width = image_size;
      vo.height = image_size;
      vo.scene_radius = 0.5 * b.diagonal();
      std::vector<Camera> cams =
          make_view_ring(kViews, 2.2 * vo.scene_radius, b.center(), 35.0, 80.0, ring_seed, vo);

      std::vector<ViewRender> views;
      views.reserve(cams.size());
      std::vector<Mask> obj;
      obj.reserve(cams.size());
      for (const Camera& cam : cams) {
        views.push_back(render_view(scene, cam));
        obj.push_back(views.back().object_mask);
      }
      int key = key_view_or_empty(obj);
      if (key < 0) fail(errc::generation, "calibration fill produced an empty scene");

      const ViewRender& kv = views[size_t(key)];
      out[size_t(k)].input = regressor_input(kv.depth, kv.object_mask, kv.container_mask);
      out[size_t(k)].target = float(fr.record.gamma_gt);
    }
  });
  return out;
}

}  // namespace
}  // namespace pipe

TrainSummary train_pipeline(const std::string& dataset_dir, const TrainOptions& options) {
  if (options.out_dir.empty()) fail(errc::config, "training needs an output directory");
  pipe::DatasetIndex ix = pipe::load_dataset_index(dataset_dir);
  pipe::check_disjoint_split(ix);

  std::vector<const pipe::IndexRow*> train_rows, val_rows;
  for (const pipe::IndexRow& r : ix.rows)
    (r.split == "train" ? train_rows : val_rows).push_back(&r);
  if (train_rows.empty() || val_rows.empty())
    fail(errc::config, dataset_dir + ": training needs scenes in both splits");

  // Per-scene key-view samples plus the depth-ratio estimate the linear
  // corrector is fitted on.
  std::vector<TrainSample> train(train_rows.size()), val(val_rows.size());
  std::vector<std::pair<double, double>> pairs(train_rows.size());
  std::vector<double> train_gamma(train_rows.size());
  parallel_for(int64_t(train_rows.size()), default_threads(), [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      const pipe::IndexRow& row = *train_rows[size_t(i)];
      pipe::KeyView kv = pipe::load_key_view(dataset_dir + "/" + row.dir);
      train[size_t(i)].input = pipe::regressor_input(kv.depth, kv.objects, kv.containers);
      train[size_t(i)].target = float(row.gamma_gt);
      Mask content = pipe::mask_union(kv.objects, kv.containers);
      pairs[size_t(i)] = {depth_extrapolated(kv.depth, content).gamma, row.gamma_gt};
      train_gamma[size_t(i)] = row.gamma_gt;
    }
  });
  parallel_for(int64_t(val_rows.size()), default_threads(), [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      const pipe::IndexRow& row = *val_rows[size_t(i)];
      pipe::KeyView kv = pipe::load_key_view(dataset_dir + "/" + row.dir);
      val[size_t(i)].input = pipe::regressor_input(kv.depth, kv.objects, kv.containers);
      val[size_t(i)].target = float(row.gamma_gt);
    }
  });

  TrainedEstimators fitted;
  fitted.mean_gamma = mean_estimator(train_gamma);
  fitted.corrector = fit_depth_corrected(pairs);

  int n_cal = options.calibration_scenes >= 0 ? options.calibration_scenes
                                              : std::max<int>(16, int(train_rows.size()) / 8);
  std::vector<TrainSample> calib =
      pipe::calibration_samples(n_cal, ix.image_size, ix.master_seed);
  train.insert(train.end(), std::make_move_iterator(calib.begin()),
               std::make_move_iterator(calib.end()));

  TrainResult tr = train_regressor(train, val, options.hyper, options.out_dir + "/train_log.csv");

  std::string params_path = options.out_dir + "/" + pipe::kParamsFile;
  save_regressor(params_path, tr.params);
  save_estimators(options.out_dir + "/" + pipe::kEstimatorsFile, fitted);

  TrainSummary sum;
  sum.n_train = int(train_rows.size());
  sum.n_val = int(val_rows.size());
  sum.n_calibration = n_cal;
  sum.best_epoch = tr.best_epoch;
  sum.best_val_mse = tr.best_val_mse;
  sum.mean_gamma = fitted.mean_gamma;
  sum.params_path = params_path;
  std::string blob = read_file(params_path);
  sum.params_crc = crc32_bytes(blob.data(), blob.size());
  return sum;
}

AblationResult depth_source_ablation(const std::string& dataset_dir,
                                     const AblationOptions& options) {
  pipe::DatasetIndex ix = pipe::load_dataset_index(dataset_dir);
  pipe::check_disjoint_split(ix);

  std::vector<const pipe::IndexRow*> train_rows, val_rows;
  for (const pipe::IndexRow& r : ix.rows)
    (r.split == "train" ? train_rows : val_rows).push_back(&r);
  if (train_rows.empty() || val_rows.empty())
    fail(errc::config, dataset_dir + ": the depth-source study needs scenes in both splits");

  // Clean and degraded key-view inputs, built once per scene.
  struct Item {
    const pipe::IndexRow* row = nullptr;
    double unit_volume = 0.0;
    std::vector<float> clean, degraded;
  };
  auto build = [&](const std::vector<const pipe::IndexRow*>& rows, bool with_meta) {
    std::vector<Item> items(rows.size());
    parallel_for(int64_t(rows.size()), default_threads(), [&](int64_t lo, int64_t hi) {
      for (int64_t i = lo; i < hi; ++i) {
        Item& it = items[size_t(i)];
        it.row = rows[size_t(i)];
        std::string dir = dataset_dir + "/" + it.row->dir;
        pipe::KeyView kv = pipe::load_key_view(dir);
        it.clean = pipe::regressor_input(kv.depth, kv.objects, kv.containers);
        DepthMap noisy = kv.depth;
        pipe::degrade_depth(noisy, options.degrade,
                            fnv1a64(it.row->scene_id) ^ options.degrade.seed);
        it.degraded = pipe::regressor_input(noisy, kv.objects, kv.containers);
        if (with_meta) it.unit_volume = read_manifest(dir + "/manifest.json").unit_volume;
      }
    });
    return items;
  };
  std::vector<Item> train_items = build(train_rows, false);
  std::vector<Item> val_items = build(val_rows, true);

  auto samples = [](const std::vector<Item>& items, bool degraded) {
    std::vector<TrainSample> s(items.size());
    for (size_t i = 0; i < items.size(); ++i) {
      s[i].input = degraded ? items[i].degraded : items[i].clean;
      s[i].target = float(items[i].row->gamma_gt);
    }
    return s;
  };

  // One regressor per training regime, each evaluated under both regimes.
  // Scene volumes are injected from ground truth so the grid isolates the
  // occupancy estimate.
  RegressorParams trained[2];
  for (int t = 0; t < 2; ++t)
    trained[t] =
        train_regressor(samples(train_items, t == 1), samples(val_items, t == 1), options.hyper)
            .params;

  AblationResult result;
  int cell = 0;
  for (int t = 0; t < 2; ++t)
    for (int e = 0; e < 2; ++e, ++cell) {
      std::vector<SceneRow> rows;
      rows.reserve(val_items.size());
      for (const Item& it : val_items) {
        SceneRow row;
        row.scene_id = it.row->scene_id;
        row.shape_id = it.row->shape_id;
        row.n_gt = it.row->n_objects;
        row.gamma_gt = it.row->gamma_gt;
        row.gamma_est =
            regressor_forward(trained[t], e == 1 ? it.degraded : it.clean).gamma;
        row.unit_volume = it.unit_volume;
        row.volume_est = it.row->gamma_gt > 0
                             ? double(it.row->n_objects) * it.unit_volume / it.row->gamma_gt
                             : 0.0;
        CountResult c = count_objects(row.gamma_est, row.volume_est, it.unit_volume);
        row.n_est = c.n_est;
        row.n_rounded = c.n_rounded;
        rows.push_back(std::move(row));
      }
      result.cells[size_t(cell)].degraded_train = t == 1;
      result.cells[size_t(cell)].degraded_eval = e == 1;
      result.cells[size_t(cell)].report = report_from_rows(EstimatorId::regressor, std::move(rows));
    }

  if (!options.out_dir.empty()) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["noise_rel"] = options.degrade.noise_rel;
    j["blur_sigma_px"] = options.degrade.blur_sigma_px;
    j["seed"] = options.degrade.seed;
    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (const AblationCell& c : result.cells) {
      nlohmann::ordered_json jc;
      jc["train"] = c.degraded_train ? "degraded" : "clean";
      jc["eval"] = c.degraded_eval ? "degraded" : "clean";
      jc["n_scenes"] = c.report.n_scenes;
      jc["nae"] = c.report.nae;
      jc["sre"] = c.report.sre;
      jc["mae"] = c.report.mae;
      jc["smape"] = c.report.smape;
      jc["r2"] = c.report.r2;
      cells.push_back(std::move(jc));
    }
    j["cells"] = std::move(cells);
    write_file(options.out_dir + "/ablation.json", j.dump(2) + "\n");
  }
  return result;
}

}  // namespace stackcount
