#pragma once
// Shared plumbing for the counting pipeline: scene-directory loading, dataset
// index parsing, occupancy-estimator dispatch, carving glue and the key-depth
// degradation used by the depth-source study.

#include <optional>
#include <string>
#include <vector>

#include "stackcount/carve.h"
#include "stackcount/pipeline.h"
#include "stackcount/scenegen.h"

namespace stackcount::pipe {

inline constexpr const char* kParamsFile = "params.occ1";
inline constexpr const char* kEstimatorsFile = "estimators.json";

// Everything a scene directory holds when all views were saved.
struct SceneViews {
  SceneRecord record;
  std::vector<Camera> cameras;
  std::vector<DepthMap> depths;
  std::vector<Mask> objects, containers;
};

// Loads a full-view scene directory; every missing artifact is enumerated by
// name in one missing-input error.
SceneViews load_scene_views(const std::string& dir);

// The stored key view of a scene directory (always present, even when the
// full view set was not saved).
struct KeyView {
  DepthMap depth;
  Mask objects, containers;
};

KeyView load_key_view(const std::string& dir);

// Dataset header plus the scene index rows.
struct IndexRow {
  std::string scene_id, dir, shape_id, split;
  int n_objects = 0;
  double gamma_gt = 0.0;
  int key_view = 0;
};

struct DatasetIndex {
  uint64_t master_seed = 0;
  double kappa0 = 0.0;
  std::vector<std::string> families;
  int shape_seeds_per_family = 0;
  int views = 0, image_size = 0;
  std::vector<IndexRow> rows;
};

DatasetIndex load_dataset_index(const std::string& dataset_dir);

// Aborts when the train and validation splits share a shape.
void check_disjoint_split(const DatasetIndex& ix);

Mask mask_union(const Mask& a, const Mask& b);

// Index of the largest object mask, or -1 when every mask is empty.
int key_view_or_empty(const std::vector<Mask>& object_masks);

// Model artifacts, loaded on demand for the estimator that needs them.
struct EstimatorContext {
  std::optional<TrainedEstimators> fitted;
  std::optional<RegressorParams> params;
};

EstimatorContext load_estimator_context(const std::string& model_dir, EstimatorId id);

// Normalized crop the learned estimator consumes: the depth image cropped to
// the object+container union mask.
std::vector<float> regressor_input(const DepthMap& depth, const Mask& objects,
                                   const Mask& containers);

// One occupancy estimate from a key view. The depth-ratio estimators pool the
// object+container union mask; the constant estimator ignores the view.
double estimate_gamma(EstimatorId id, const EstimatorContext& ctx, const DepthMap& depth,
                      const Mask& objects, const Mask& containers);

// Wall-thickness ratio for rim erosion, or 0 (erosion skipped) when no cavity
// is detectable in the key view.
double thickness_or_zero(const Mask& containers, const Mask& objects, const DepthMap& depth);

// init -> carve -> rim erosion -> volume; the carved grid lands in *carved
// when requested.
VolumeEstimate carve_scene(const std::vector<Camera>& cameras,
                           const std::vector<DepthMap>& depths, const std::vector<Mask>& objects,
                           const std::vector<Mask>& containers, int resolution, double t_ratio,
                           VoxelGrid* carved = nullptr);

// Gaussian blur over finite depths (renormalized at mask borders, so no-hit
// pixels neither spread nor change) followed by per-pixel multiplicative
// Gaussian noise. Exact identity when both knobs are zero.
void degrade_depth(DepthMap& depth, const DepthDegrade& degrade, uint64_t stream);

}  // namespace stackcount::pipe
