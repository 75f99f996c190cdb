#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pipeline_internal.h"

namespace stackcount {
namespace {

using ordered_json = nlohmann::ordered_json;

// Complexity score per shape id, rebuilt from the dataset's declared pool.
std::map<std::string, double> shape_complexities(const pipe::DatasetIndex& ix) {
  std::map<std::string, double> scores;
  for (const std::string& name : ix.families) {
    ShapeFamily f = shape_family_from_string(name);
    for (int k = 0; k < ix.shape_seeds_per_family; ++k)
      scores[shape_id(f, uint64_t(k))] =
          complexity_score(generate_shape(f, uint64_t(k)), ix.kappa0).score;
  }
  return scores;
}

std::array<ComplexityBin, 10> bin_complexity(const std::vector<SceneRow>& rows) {
  std::array<ComplexityBin, 10> bins{};
  if (rows.empty()) return bins;
  double lo = rows[0].complexity, hi = rows[0].complexity;
  for (const SceneRow& r : rows) {
    lo = std::min(lo, r.complexity);
    hi = std::max(hi, r.complexity);
  }
  double width = (hi - lo) / double(bins.size());
  for (size_t b = 0; b < bins.size(); ++b) {
    bins[b].lo = lo + width * double(b);
    bins[b].hi = lo + width * double(b + 1);
  }
  bins.back().hi = hi;
  std::array<double, 10> err_sum{};
  for (const SceneRow& r : rows) {
    size_t b = width > 0 ? std::min(bins.size() - 1, size_t((r.complexity - lo) / width)) : 0;
    ++bins[b].count;
    err_sum[b] += std::fabs(r.gamma_gt - r.gamma_est);
  }
  for (size_t b = 0; b < bins.size(); ++b)
    if (bins[b].count > 0) bins[b].mean_abs_gamma_error = err_sum[b] / double(bins[b].count);
  return bins;
}

void write_report_csv(const std::string& path, const MetricsReport& rep) {
  std::string out =
      "scene_id,shape_id,n_gt,gamma_gt,gamma_est,n_est,n_rounded,volume_est,unit_volume,"
      "complexity\n";
  for (const SceneRow& r : rep.rows) {
    out += r.scene_id + "," + r.shape_id + "," + std::to_string(r.n_gt) + "," +
           format_double(r.gamma_gt) + "," + format_double(r.gamma_est) + "," +
           format_double(r.n_est) + "," + std::to_string(r.n_rounded) + "," +
           format_double(r.volume_est) + "," + format_double(r.unit_volume) + "," +
           format_double(r.complexity) + "\n";
  }
  write_file(path, out);
}

ordered_json aggregate_json(const MetricsReport& rep) {
  ordered_json j;
  j["estimator"] = to_string(rep.estimator_id);
  j["n_scenes"] = rep.n_scenes;
  j["nae"] = rep.nae;
  j["sre"] = rep.sre;
  j["mae"] = rep.mae;
  j["smape"] = rep.smape;
  j["r2"] = rep.r2;
  return j;
}

void write_report_json(const std::string& path, const MetricsReport& rep,
                       const std::array<ComplexityBin, 10>& bins) {
  ordered_json j;
  j["schema_version"] = 1;
  j.update(aggregate_json(rep));
  ordered_json jb = ordered_json::array();
  for (const ComplexityBin& b : bins) {
    ordered_json e;
    e["lo"] = b.lo;
    e["hi"] = b.hi;
    e["count"] = b.count;
    e["mean_abs_gamma_error"] = b.mean_abs_gamma_error;
    jb.push_back(std::move(e));
  }
  j["complexity_bins"] = std::move(jb);
  write_file(path, j.dump(2) + "\n");
}

// Minimal complexity-vs-error scatter: one circle per scene.
void write_scatter_svg(const std::string& path, const MetricsReport& rep) {
  constexpr int kW = 640, kH = 480, kMargin = 56;
  double clo = 0, chi = 1, emax = 1e-6;
  if (!rep.rows.empty()) {
    clo = chi = rep.rows[0].complexity;
    for (const SceneRow& r : rep.rows) {
      clo = std::min(clo, r.complexity);
      chi = std::max(chi, r.complexity);
      emax = std::max(emax, std::fabs(r.gamma_gt - r.gamma_est));
    }
    if (chi <= clo) chi = clo + 1;
  }
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return std::string(buf);
  };
  auto px = [&](double c) { return kMargin + (c - clo) / (chi - clo) * (kW - 2 * kMargin); };
  auto py = [&](double e) { return kH - kMargin - e / emax * (kH - 2 * kMargin); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kW) +
                  "\" height=\"" + std::to_string(kH) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<line x1=\"" + fmt(kMargin) + "\" y1=\"" + fmt(kH - kMargin) + "\" x2=\"" +
       fmt(kW - kMargin) + "\" y2=\"" + fmt(kH - kMargin) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + fmt(kMargin) + "\" y1=\"" + fmt(kH - kMargin) + "\" x2=\"" + fmt(kMargin) +
       "\" y2=\"" + fmt(kMargin) + "\" stroke=\"black\"/>\n";
  s += "<text x=\"" + fmt(kW / 2) + "\" y=\"" + fmt(kH - 16) +
       "\" text-anchor=\"middle\" font-size=\"13\">shape complexity</text>\n";
  s += "<text x=\"16\" y=\"" + fmt(kH / 2) + "\" text-anchor=\"middle\" font-size=\"13\" " +
       "transform=\"rotate(-90 16 " + fmt(kH / 2) + ")\">|occupancy error|</text>\n";
  s += "<text x=\"" + fmt(kMargin) + "\" y=\"" + fmt(kH - kMargin + 16) +
       "\" font-size=\"11\">" + fmt(clo) + "</text>\n";
  s += "<text x=\"" + fmt(kW - kMargin) + "\" y=\"" + fmt(kH - kMargin + 16) +
       "\" text-anchor=\"end\" font-size=\"11\">" + fmt(chi) + "</text>\n";
  s += "<text x=\"" + fmt(kMargin - 4) + "\" y=\"" + fmt(kMargin) +
       "\" text-anchor=\"end\" font-size=\"11\">" + fmt(emax) + "</text>\n";
  for (const SceneRow& r : rep.rows)
    s += "<circle cx=\"" + fmt(px(r.complexity)) + "\" cy=\"" +
         fmt(py(std::fabs(r.gamma_gt - r.gamma_est))) + "\" r=\"2.5\" fill=\"steelblue\" " +
         "fill-opacity=\"0.6\"/>\n";
  s += "</svg>\n";
  write_file(path, s);
}

}  // namespace

EvaluateResult evaluate(const std::string& dataset_dir, const EvaluateOptions& options) {
  if (options.estimators.empty()) fail(errc::config, "evaluation needs at least one estimator");
  if (options.carve_resolution < 8) fail(errc::config, "carve resolution too small");
  pipe::DatasetIndex ix = pipe::load_dataset_index(dataset_dir);
  pipe::check_disjoint_split(ix);

  std::vector<const pipe::IndexRow*> train_rows, val_rows;
  for (const pipe::IndexRow& r : ix.rows)
    (r.split == "train" ? train_rows : val_rows).push_back(&r);
  if (train_rows.empty() || val_rows.empty())
    fail(errc::config, dataset_dir + ": evaluation needs scenes in both splits");

  std::map<std::string, double> complexity = shape_complexities(ix);
  for (const pipe::IndexRow* r : val_rows)
    if (!complexity.count(r->shape_id))
      fail(errc::config, dataset_dir + ": index references unknown shape " + r->shape_id);

  // Baselines are fitted on the training split's stored key views.
  std::vector<double> train_gamma(train_rows.size());
  std::vector<std::pair<double, double>> pairs(train_rows.size());
  parallel_for(int64_t(train_rows.size()), default_threads(), [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      const pipe::IndexRow& row = *train_rows[size_t(i)];
      pipe::KeyView kv = pipe::load_key_view(dataset_dir + "/" + row.dir);
      Mask content = pipe::mask_union(kv.objects, kv.containers);
      pairs[size_t(i)] = {depth_extrapolated(kv.depth, content).gamma, row.gamma_gt};
      train_gamma[size_t(i)] = row.gamma_gt;
    }
  });
  pipe::EstimatorContext ctx;
  ctx.fitted = TrainedEstimators{mean_estimator(train_gamma), fit_depth_corrected(pairs)};
  bool want_regressor = false;
  for (EstimatorId id : options.estimators) want_regressor |= id == EstimatorId::regressor;
  if (want_regressor) {
    namespace fs = std::filesystem;
    if (options.model_dir.empty())
      fail(errc::config, "evaluating the learned estimator needs a trained model directory");
    std::string p = options.model_dir + "/" + pipe::kParamsFile;
    if (!fs::exists(p)) fail(errc::missing_input, "model artifacts missing: " + p);
    ctx.params = load_regressor(p);
  }

  // Held-out scenes: one carve (views re-rendered off the manifest) shared by
  // every estimator, one occupancy estimate per estimator.
  size_t n_est = options.estimators.size();
  std::vector<std::vector<SceneRow>> rows(n_est, std::vector<SceneRow>(val_rows.size()));
  parallel_for(int64_t(val_rows.size()), default_threads(), [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      const pipe::IndexRow& row = *val_rows[size_t(i)];
      std::string dir = dataset_dir + "/" + row.dir;
      SceneRecord rec = read_manifest(dir + "/manifest.json");
      pipe::KeyView kv = pipe::load_key_view(dir);
      std::vector<Camera> cams = read_cameras_json(dir + "/cameras.json");

      LabeledScene scene = realize_record(rec);
      std::vector<DepthMap> depths;
      std::vector<Mask> objects, containers;
      depths.reserve(cams.size());
      objects.reserve(cams.size());
      containers.reserve(cams.size());
      for (const Camera& cam : cams) {
        ViewRender vr = render_view(scene, cam);
        depths.push_back(std::move(vr.depth));
        objects.push_back(std::move(vr.object_mask));
        containers.push_back(std::move(vr.container_mask));
      }
      double t = pipe::thickness_or_zero(kv.containers, kv.objects, kv.depth);
      VolumeEstimate ve = pipe::carve_scene(cams, depths, objects, containers,
                                            options.carve_resolution, t);

      for (size_t e = 0; e < n_est; ++e) {
        SceneRow& out = rows[e][size_t(i)];
        out.scene_id = row.scene_id;
        out.shape_id = row.shape_id;
        out.n_gt = row.n_objects;
        out.gamma_gt = row.gamma_gt;
        out.gamma_est = pipe::estimate_gamma(options.estimators[e], ctx, kv.depth, kv.objects,
                                             kv.containers);
        out.volume_est = ve.volume;
        out.unit_volume = rec.unit_volume;
        out.complexity = complexity.at(row.shape_id);
        CountResult c = count_objects(out.gamma_est, out.volume_est, out.unit_volume);
        out.n_est = c.n_est;
        out.n_rounded = c.n_rounded;
      }
    }
  });

  EvaluateResult result;
  result.reports.reserve(n_est);
  result.complexity.reserve(n_est);
  for (size_t e = 0; e < n_est; ++e) {
    result.reports.push_back(report_from_rows(options.estimators[e], std::move(rows[e])));
    result.complexity.push_back(bin_complexity(result.reports.back().rows));
  }

  if (!options.out_dir.empty()) {
    ordered_json summary;
    summary["schema_version"] = 1;
    summary["carve_resolution"] = options.carve_resolution;
    summary["n_train"] = int(train_rows.size());
    summary["n_val"] = int(val_rows.size());
    ordered_json ests = ordered_json::array();
    for (size_t e = 0; e < n_est; ++e) {
      const MetricsReport& rep = result.reports[e];
      std::string name = to_string(rep.estimator_id);
      write_report_csv(options.out_dir + "/report_" + name + ".csv", rep);
      write_report_json(options.out_dir + "/report_" + name + ".json", rep,
                        result.complexity[e]);
      if (options.scatter_svg) write_scatter_svg(options.out_dir + "/scatter_" + name + ".svg", rep);
      ests.push_back(aggregate_json(rep));
    }
    summary["estimators"] = std::move(ests);
    write_file(options.out_dir + "/summary.json", summary.dump(2) + "\n");
  }
  return result;
}

BorderReport border_report(const std::string& dataset_dir) {
  pipe::DatasetIndex ix = pipe::load_dataset_index(dataset_dir);
  BorderReport rep;
  double sum_with = 0, sum_no = 0;
  for (const pipe::IndexRow& row : ix.rows) {
    SceneRecord rec = read_manifest(dataset_dir + "/" + row.dir + "/manifest.json");
    sum_with += rec.gamma_gt;
    sum_no += rec.gamma_no_edges;
    ++rep.n_scenes;
  }
  rep.mean_gamma_with = sum_with / double(rep.n_scenes);
  rep.mean_gamma_no = sum_no / double(rep.n_scenes);
  rep.delta = std::fabs(rep.mean_gamma_with - rep.mean_gamma_no);
  return rep;
}

}  // namespace stackcount
