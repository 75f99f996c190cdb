#include <cmath>
#include <utility>

#include <json.hpp>

#include "pipeline_internal.h"

namespace stackcount {
namespace pipe {

std::vector<float> regressor_input(const DepthMap& depth, const Mask& objects,
                                   const Mask& containers) {
  return normalize_crop(crop_to_mask(depth, mask_union(objects, containers), kCropSize));
}

double estimate_gamma(EstimatorId id, const EstimatorContext& ctx, const DepthMap& depth,
                      const Mask& objects, const Mask& containers) {
  switch (id) {
    case EstimatorId::mean:
      return ctx.fitted->mean_gamma;
    case EstimatorId::depth_extrapolated:
      return depth_extrapolated(depth, mask_union(objects, containers)).gamma;
    case EstimatorId::depth_corrected:
      return ctx.fitted->corrector.apply(
          depth_extrapolated(depth, mask_union(objects, containers)).gamma);
    case EstimatorId::regressor:
      return regressor_forward(*ctx.params, regressor_input(depth, objects, containers)).gamma;
  }
  fail(errc::config, "unknown estimator");
}

double thickness_or_zero(const Mask& containers, const Mask& objects, const DepthMap& depth) {
  try {
    return estimate_thickness(containers, objects, depth).t_ratio;
  } catch (const error&) {
    return 0.0;  // no detectable cavity: erosion is skipped
  }
}

VolumeEstimate carve_scene(const std::vector<Camera>& cameras,
                           const std::vector<DepthMap>& depths, const std::vector<Mask>& objects,
                           const std::vector<Mask>& containers, int resolution, double t_ratio,
                           VoxelGrid* carved) {
  CarveInput in;
  in.cameras = cameras;
  in.depths = depths;
  in.resolution = resolution;
  in.masks.reserve(objects.size());
  for (size_t i = 0; i < objects.size(); ++i)
    in.masks.push_back(mask_union(objects[i], containers[i]));

  VoxelGrid g = init_grid(in);
  carve(g, in);
  if (t_ratio > 0 && g.count() > 0) {
    try {
      erode_container(g, t_ratio, 2);
    } catch (const error&) {
      g.fill(false);  // the hull was all wall; nothing remains
    }
  }
  VolumeEstimate ve = grid_volume(g);
  if (carved) *carved = std::move(g);
  return ve;
}

}  // namespace pipe

CountResult run_scene(const std::string& scene_dir, EstimatorId estimator,
                      const PipelineConfig& config) {
  if (config.carve_resolution < 8) fail(errc::config, "carve resolution too small");
  pipe::SceneViews sv = pipe::load_scene_views(scene_dir);
  double unit_volume = config.unit_volume_override.value_or(sv.record.unit_volume);

  CountResult result;
  result.scene_id = sv.record.scene_id;
  result.estimator_id = estimator;
  result.unit_volume_used = unit_volume;

  int key = pipe::key_view_or_empty(sv.objects);
  double thickness = 0.0;
  VoxelGrid carved;
  uint64_t voxel_count = 0;
  bool have_carved = false;
  if (key >= 0) {
    double gamma;
    if (config.gamma_override) {
      gamma = *config.gamma_override;
    } else {
      pipe::EstimatorContext ctx = pipe::load_estimator_context(config.model_dir, estimator);
      gamma = pipe::estimate_gamma(estimator, ctx, sv.depths[size_t(key)],
                                   sv.objects[size_t(key)], sv.containers[size_t(key)]);
    }
    thickness = config.thickness_override
                    ? *config.thickness_override
                    : pipe::thickness_or_zero(sv.containers[size_t(key)], sv.objects[size_t(key)],
                                              sv.depths[size_t(key)]);
    double volume;
    if (config.volume_override) {
      volume = *config.volume_override;
    } else {
      VolumeEstimate ve = pipe::carve_scene(sv.cameras, sv.depths, sv.objects, sv.containers,
                                            config.carve_resolution, thickness, &carved);
      volume = ve.volume;
      voxel_count = ve.voxel_count;
      have_carved = true;
    }
    CountResult c = count_objects(gamma, volume, unit_volume);
    result.n_est = c.n_est;
    result.n_rounded = c.n_rounded;
    result.gamma_used = c.gamma_used;
    result.volume_used = c.volume_used;
  }
  // key < 0: no object pixel in any view; everything stays zero.

  if (config.persist) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["scene_id"] = result.scene_id;
    j["estimator"] = to_string(estimator);
    j["key_view"] = key;
    j["gamma_est"] = result.gamma_used;
    j["thickness_used"] = thickness;
    j["carve_resolution"] = config.carve_resolution;
    j["volume_est"] = result.volume_used;
    j["unit_volume"] = result.unit_volume_used;
    j["n_est"] = result.n_est;
    j["n_rounded"] = result.n_rounded;
    if (have_carved) {
      j["voxel_count"] = voxel_count;
      j["carved"] = "carved.vox";
      save_voxels(scene_dir + "/pipeline/carved.vox", carved);
    }
    write_file(scene_dir + "/pipeline/result.json", j.dump(2) + "\n");
  }
  return result;
}

}  // namespace stackcount
