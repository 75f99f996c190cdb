#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pipeline_internal.h"

namespace stackcount {
namespace {

using ordered_json = nlohmann::ordered_json;

const ordered_json& need(const ordered_json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) fail(errc::config, path + ": missing field: " + key);
  return *it;
}

std::string view_suffix(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%03d", i);
  return buf;
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (const std::string& n : names) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

}  // namespace

void save_estimators(const std::string& path, const TrainedEstimators& e) {
  ordered_json j;
  j["schema_version"] = 1;
  j["mean_gamma"] = e.mean_gamma;
  j["corrector_a"] = e.corrector.a;
  j["corrector_b"] = e.corrector.b;
  write_file(path, j.dump(2) + "\n");
}

TrainedEstimators load_estimators(const std::string& path) {
  ordered_json j = ordered_json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) fail(errc::config, path + ": estimator file is not valid JSON");
  TrainedEstimators e;
  try {
    e.mean_gamma = need(j, "mean_gamma", path).get<double>();
    e.corrector.a = need(j, "corrector_a", path).get<double>();
    e.corrector.b = need(j, "corrector_b", path).get<double>();
  } catch (const ordered_json::exception& ex) {
    fail(errc::config, path + ": estimator field has the wrong type: " + ex.what());
  }
  if (!std::isfinite(e.mean_gamma) || !std::isfinite(e.corrector.a) || !std::isfinite(e.corrector.b))
    fail(errc::config, path + ": estimator parameters must be finite");
  return e;
}

namespace pipe {

SceneViews load_scene_views(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> missing;
  auto present = [&](const std::string& name) {
    if (fs::exists(fs::path(dir) / name)) return true;
    missing.push_back(name);
    return false;
  };

  present("manifest.json");
  SceneViews sv;
  if (present("cameras.json")) {
    sv.cameras = read_cameras_json(dir + "/cameras.json");
    if (sv.cameras.empty()) fail(errc::config, dir + ": cameras.json holds no cameras");
    for (size_t i = 0; i < sv.cameras.size(); ++i) {
      std::string s = view_suffix(int(i));
      present("depth" + s + ".pfm");
      present("mask_obj" + s + ".pgm");
      present("mask_cont" + s + ".pgm");
    }
  }
  if (!missing.empty())
    fail(errc::missing_input, dir + ": scene artifacts missing: " + join_names(missing));

  sv.record = read_manifest(dir + "/manifest.json");
  sv.depths.reserve(sv.cameras.size());
  sv.objects.reserve(sv.cameras.size());
  sv.containers.reserve(sv.cameras.size());
  for (size_t i = 0; i < sv.cameras.size(); ++i) {
    std::string s = view_suffix(int(i));
    sv.depths.push_back(read_pfm(dir + "/depth" + s + ".pfm"));
    sv.objects.push_back(read_pgm(dir + "/mask_obj" + s + ".pgm"));
    sv.containers.push_back(read_pgm(dir + "/mask_cont" + s + ".pgm"));
  }
  return sv;
}

KeyView load_key_view(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> missing;
  for (const char* name : {"key_depth.pfm", "key_object_mask.pgm", "key_container_mask.pgm"})
    if (!fs::exists(fs::path(dir) / name)) missing.push_back(name);
  if (!missing.empty())
    fail(errc::missing_input, dir + ": scene artifacts missing: " + join_names(missing));

  KeyView kv;
  kv.depth = read_pfm(dir + "/key_depth.pfm");
  kv.objects = read_pgm(dir + "/key_object_mask.pgm");
  kv.containers = read_pgm(dir + "/key_container_mask.pgm");
  return kv;
}

DatasetIndex load_dataset_index(const std::string& dataset_dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> missing;
  for (const char* name : {"dataset.json", "index.ndjson"})
    if (!fs::exists(fs::path(dataset_dir) / name)) missing.push_back(name);
  if (!missing.empty())
    fail(errc::missing_input, dataset_dir + ": dataset artifacts missing: " + join_names(missing));

  std::string hdr_path = dataset_dir + "/dataset.json";
  ordered_json j = ordered_json::parse(read_file(hdr_path), nullptr, false);
  if (j.is_discarded()) fail(errc::config, hdr_path + ": dataset header is not valid JSON");

  DatasetIndex ix;
  try {
    ix.master_seed = need(j, "master_seed", hdr_path).get<uint64_t>();
    ix.kappa0 = need(j, "kappa0", hdr_path).get<double>();
    for (const auto& f : need(j, "families", hdr_path)) ix.families.push_back(f.get<std::string>());
    ix.shape_seeds_per_family = need(j, "shape_seeds_per_family", hdr_path).get<int>();
    ix.views = need(j, "views", hdr_path).get<int>();
    ix.image_size = need(j, "image_size", hdr_path).get<int>();
  } catch (const ordered_json::exception& ex) {
    fail(errc::config, hdr_path + ": dataset field has the wrong type: " + ex.what());
  }

  std::string ix_path = dataset_dir + "/index.ndjson";
  std::string body = read_file(ix_path);
  size_t pos = 0;
  while (pos < body.size()) {
    size_t end = body.find('\n', pos);
    if (end == std::string::npos) end = body.size();
    std::string line = body.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    ordered_json r = ordered_json::parse(line, nullptr, false);
    if (r.is_discarded()) fail(errc::config, ix_path + ": index line is not valid JSON");
    IndexRow row;
    try {
      row.scene_id = need(r, "scene_id", ix_path).get<std::string>();
      row.dir = need(r, "dir", ix_path).get<std::string>();
      row.shape_id = need(r, "shape_id", ix_path).get<std::string>();
      row.split = need(r, "split", ix_path).get<std::string>();
      row.n_objects = need(r, "n_objects", ix_path).get<int>();
      row.gamma_gt = need(r, "gamma_gt", ix_path).get<double>();
      row.key_view = need(r, "key_view", ix_path).get<int>();
    } catch (const ordered_json::exception& ex) {
      fail(errc::config, ix_path + ": index field has the wrong type: " + ex.what());
    }
    if (row.split != "train" && row.split != "val")
      fail(errc::config, ix_path + ": unknown split label: " + row.split);
    ix.rows.push_back(std::move(row));
  }
  if (ix.rows.empty()) fail(errc::config, ix_path + ": dataset index holds no scenes");
  return ix;
}

void check_disjoint_split(const DatasetIndex& ix) {
  std::set<std::string> train_shapes, val_shapes;
  for (const IndexRow& r : ix.rows)
    (r.split == "train" ? train_shapes : val_shapes).insert(r.shape_id);
  for (const std::string& s : val_shapes)
    if (train_shapes.count(s))
      fail(errc::config, "split leakage: shape " + s + " appears in both train and validation");
}

Mask mask_union(const Mask& a, const Mask& b) {
  if (a.width != b.width || a.height != b.height)
    fail(errc::config, "mask union needs equal image sizes");
  Mask u = a;
  for (size_t i = 0; i < u.bits.size(); ++i) u.bits[i] = (a.bits[i] | b.bits[i]) ? 1 : 0;
  return u;
}

int key_view_or_empty(const std::vector<Mask>& object_masks) {
  int best = -1;
  int64_t best_count = 0;
  for (size_t i = 0; i < object_masks.size(); ++i) {
    int64_t c = object_masks[i].count();
    if (c > best_count) {
      best_count = c;
      best = int(i);
    }
  }
  return best;
}

EstimatorContext load_estimator_context(const std::string& model_dir, EstimatorId id) {
  namespace fs = std::filesystem;
  EstimatorContext ctx;
  if (id == EstimatorId::depth_extrapolated) return ctx;
  if (model_dir.empty())
    fail(errc::config, std::string(to_string(id)) + " estimator needs a trained model directory");

  if (id == EstimatorId::regressor) {
    std::string p = model_dir + "/" + kParamsFile;
    if (!fs::exists(p)) fail(errc::missing_input, "model artifacts missing: " + p);
    ctx.params = load_regressor(p);
  } else {
    std::string p = model_dir + "/" + kEstimatorsFile;
    if (!fs::exists(p)) fail(errc::missing_input, "model artifacts missing: " + p);
    ctx.fitted = load_estimators(p);
  }
  return ctx;
}

}  // namespace pipe
}  // namespace stackcount
