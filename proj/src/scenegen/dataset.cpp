#include <algorithm>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "stackcount/geometry.h"
#include "stackcount/scenegen.h"

namespace stackcount {
namespace {

using ordered_json = nlohmann::ordered_json;

struct PoolEntry {
  ShapeFamily family;
  uint64_t shape_seed;
  std::string id;
  TriMesh mesh;
  bool holdout = false;
};

std::string scene_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%06d", i);
  return buf;
}

Camera scaled_camera(const Camera& c, int w, int h) {
  double kx = double(w) / c.width, ky = double(h) / c.height;
  Camera p = c;
  p.fx = c.fx * kx;
  p.fy = c.fy * ky;
  p.cx = c.cx * kx;
  p.cy = c.cy * ky;
  p.width = w;
  p.height = h;
  return p;
}

}  // namespace

DatasetSummary dataset_generate(const DatasetConfig& config) {
  if (config.out_dir.empty()) fail(errc::config, "dataset output directory not set");
  if (config.scenes < 1) fail(errc::config, "dataset needs at least one scene");
  if (config.families.empty()) fail(errc::config, "dataset needs at least one shape family");
  if (config.shape_seeds_per_family < 1) fail(errc::config, "shape seeds per family must be >= 1");
  if (!(config.holdout_fraction >= 0 && config.holdout_fraction < 1))
    fail(errc::config, "holdout fraction out of range [0, 1)");
  if (config.views < 1 || config.image_size < 16 || config.probe_size < 16)
    fail(errc::config, "render configuration out of range");
  if (config.fill_choices.empty()) fail(errc::config, "dataset needs fill fractions");

  // Shape pool and its complexity normalizer.
  std::vector<PoolEntry> pool;
  for (ShapeFamily f : config.families)
    for (int k = 0; k < config.shape_seeds_per_family; ++k)
      pool.push_back({f, uint64_t(k), shape_id(f, uint64_t(k)), generate_shape(f, uint64_t(k)),
                      false});
  double kappa0 = 0;
  for (const auto& e : pool)
    kappa0 = std::max(kappa0, complexity_score(e.mesh, 1.0).kappa_scaled);

  // Shape-disjoint split: a seeded shuffle marks the holdout tail.
  int n_holdout = std::min(int(pool.size()) - 1,
                           int(std::lround(config.holdout_fraction * pool.size())));
  if (config.holdout_fraction > 0) n_holdout = std::max(n_holdout, 1);
  {
    std::vector<int> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(Rng::stream(config.master_seed, 0));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[size_t(shuffle_rng.below(i))]);
    for (int i = 0; i < n_holdout; ++i) pool[size_t(order[size_t(i)])].holdout = true;
  }

  DatasetSummary sum;
  sum.kappa0 = kappa0;
  std::string index;
  for (int i = 0; i < config.scenes; ++i) {
    Rng rng(Rng::stream(config.master_seed, uint64_t(i) + 1));
    const PoolEntry& entry = pool[size_t(i) % pool.size()];

    ContainerSpec c;
    c.interior = {rng.uniform(config.interior_lo.x, config.interior_hi.x),
                  rng.uniform(config.interior_lo.y, config.interior_hi.y),
                  rng.uniform(config.interior_lo.z, config.interior_hi.z)};
    c.wall_thickness_ratio = config.wall_thickness_ratio;
    double fill = config.fill_choices[size_t(rng.below(config.fill_choices.size()))];
    uint64_t fill_seed = rng.u64();
    uint64_t ring_seed = rng.u64();

    FillOptions opt;
    opt.resolution = config.settle_resolution;
    FillResult fr = fill_container(c, entry.mesh, fill_seed, fill, opt);
    fr.record.scene_id = scene_name(i);
    fr.record.shape_id = entry.id;
    LabeledScene scene = realize_scene(fr);

    AABB b = scene.cells.bounds();
    ViewRingOptions vo;
    vo.width = config.image_size;
    vo.height = config.image_size;
    vo.scene_radius = 0.5 * b.diagonal();
    double radius = config.camera_radius_factor * vo.scene_radius;
    std::vector<Camera> cams =
        make_view_ring(config.views, radius, b.center(), 35.0, 80.0, ring_seed, vo);

    // Key view from low-resolution probe masks, then a full render of it.
    std::vector<Mask> probe_obj;
    probe_obj.reserve(cams.size());
    for (const Camera& cam : cams) {
      ViewRender pv = render_view(scene, scaled_camera(cam, config.probe_size, config.probe_size));
      probe_obj.push_back(std::move(pv.object_mask));
    }
    int key = select_key_view(probe_obj);

    std::string dir = config.out_dir + "/scenes/" + fr.record.scene_id;
    write_manifest(dir + "/manifest.json", fr.record);
    write_cameras_json(dir + "/cameras.json", cams);
    ViewRender kv = render_view(scene, cams[size_t(key)]);
    write_pfm(dir + "/key_depth.pfm", kv.depth);
    write_pgm(dir + "/key_object_mask.pgm", kv.object_mask);
    write_pgm(dir + "/key_container_mask.pgm", kv.container_mask);
    if (config.save_all_views) {
      for (size_t v = 0; v < cams.size(); ++v) {
        ViewRender r = v == size_t(key) ? std::move(kv) : render_view(scene, cams[v]);
        char suffix[32];
        std::snprintf(suffix, sizeof suffix, "_%03d", int(v));
        write_pfm(dir + "/depth" + suffix + ".pfm", r.depth);
        write_pgm(dir + "/mask_obj" + suffix + ".pgm", r.object_mask);
        write_pgm(dir + "/mask_cont" + suffix + ".pgm", r.container_mask);
      }
    }
    ordered_json rj;
    rj["key_view"] = key;
    rj["views"] = config.views;
    rj["image_size"] = config.image_size;
    rj["all_views_saved"] = config.save_all_views;
    write_file(dir + "/render.json", rj.dump(2) + "\n");

    ordered_json line;
    line["scene_id"] = fr.record.scene_id;
    line["dir"] = "scenes/" + fr.record.scene_id;
    line["shape_id"] = entry.id;
    line["split"] = entry.holdout ? "val" : "train";
    line["n_objects"] = fr.record.n_objects;
    line["gamma_gt"] = fr.record.gamma_gt;
    line["fill_fraction"] = fill;
    line["key_view"] = key;
    index += line.dump() + "\n";
    ++sum.n_scenes;
    entry.holdout ? ++sum.n_val : ++sum.n_train;
  }

  sum.index_path = config.out_dir + "/index.ndjson";
  write_file(sum.index_path, index);

  ordered_json dj;
  dj["schema_version"] = 1;
  dj["config_hash"] = config.config_hash;
  dj["master_seed"] = config.master_seed;
  dj["scenes"] = sum.n_scenes;
  dj["train_scenes"] = sum.n_train;
  dj["val_scenes"] = sum.n_val;
  dj["kappa0"] = kappa0;
  ordered_json fams = ordered_json::array();
  for (ShapeFamily f : config.families) fams.push_back(to_string(f));
  dj["families"] = std::move(fams);
  dj["shape_seeds_per_family"] = config.shape_seeds_per_family;
  dj["holdout_fraction"] = config.holdout_fraction;
  dj["settle_resolution"] = config.settle_resolution;
  dj["views"] = config.views;
  dj["image_size"] = config.image_size;
  dj["probe_size"] = config.probe_size;
  write_file(config.out_dir + "/dataset.json", dj.dump(2) + "\n");
  return sum;
}

}  // namespace stackcount
