#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stackcount/geometry.h"
#include "stackcount/grid.h"
#include "stackcount/render.h"
#include "stackcount/util.h"

namespace stackcount {

// Every generated object mesh is rescaled so its longest bounding-box side
// equals this, with the bounding box centered on the origin.
inline constexpr double kShapeSide = 0.05;

enum class ShapeFamily { sphere, box, capsule, torus, ell, cross, tube, composite };

const char* to_string(ShapeFamily f);
ShapeFamily shape_family_from_string(const std::string& s);
inline constexpr std::array<ShapeFamily, 8> kAllShapeFamilies = {
    ShapeFamily::sphere, ShapeFamily::box,  ShapeFamily::capsule, ShapeFamily::torus,
    ShapeFamily::ell,    ShapeFamily::cross, ShapeFamily::tube,   ShapeFamily::composite};

// Watertight, normalized mesh; deterministic in (family, seed). Family
// parameters are jittered from the seed; invalid parameter draws are retried
// with a fresh perturbation up to 8 times before erroring.
TriMesh generate_shape(ShapeFamily family, uint64_t seed);
std::string shape_id(ShapeFamily family, uint64_t seed);  // e.g. "torus:12"

// Axis-aligned cuboid centered on the origin (shared by fixtures and tests).
TriMesh box_mesh(double sx, double sy, double sz);

struct ContainerSpec {
  enum class Kind { box, none };
  Kind kind = Kind::box;
  Vec3 interior{1, 1, 1};  // (lx, ly, lz), scene units
  double wall_thickness_ratio = 0.04;
  Rigid pose;  // local -> world; interior minimum corner at local (0, 0, 0)

  double wall() const { return wall_thickness_ratio * std::max(interior.x, interior.y); }
  void validate() const;
};

struct SceneRecord {
  std::string scene_id;
  std::string shape_id;
  uint64_t seed = 0;
  int n_objects = 0;
  double gamma_gt = 0.0;        // occupied / interior slab up to the stack top
  double gamma_no_edges = 0.0;  // same measure over the centered half-size sub-box
  double gamma_full = 0.0;      // occupied / full interior volume
  double unit_volume = 0.0;     // one object's voxel volume at settle resolution
  ContainerSpec container;
  std::vector<std::array<double, 7>> placements;  // qw qx qy qz tx ty tz per object
  double fill_fraction = 1.0;
  int settle_resolution = 0;
  double settle_voxel = 0.0;
};

// One object voxelized at a fixed orientation, with per-column support
// profiles used by the settling contact test. Columns are (x, y) indices into
// the template's own grid.
struct ObjectTemplate {
  VoxelGrid vox;
  Quat orientation;
  std::vector<int> bottom, top;  // per column; -1 marks an empty column

  int footprint_x() const { return vox.nx; }
  int footprint_y() const { return vox.ny; }
  void rebuild_profiles();
};

// Builds the template for a mesh at one orientation and settle voxel size.
ObjectTemplate make_template(const TriMesh& mesh, const Quat& orientation, double voxel);

// The 24 rotations of the cube group, quaternion form, fixed order.
const std::array<Quat, 24>& cube_orientations();

// Interior occupancy plus per-column stack heights. The grid covers only the
// container interior; index (0,0,0) sits at the interior minimum corner.
struct SettleGrid {
  VoxelGrid occ;
  std::vector<int> height;  // per (x, y) column: one above the topmost solid cell
  int rim = 0;              // cells above this z index are outside the container
  long height_sum = 0;      // running sum of all column heights

  SettleGrid() = default;
  SettleGrid(int nx, int ny, int nz, double voxel);
  int& height_at(int x, int y) { return height[size_t(y) * occ.nx + x]; }
  int height_at(int x, int y) const { return height[size_t(y) * occ.nx + x]; }
  double mean_height() const { return double(height_sum) / double(height.size()); }
};

struct DropResult {
  bool placed = false;
  bool overflow = false;  // rejected: some voxel would rest above the rim
  int x = 0, y = 0, z = 0;  // grid cell of the template's minimum corner
};

// Drops the template straight down at the given column until first contact
// with existing stack or floor. The grid is updated only when the object is
// placed (no voxel of a placed object may exceed the rim).
DropResult settle_drop(SettleGrid& grid, const ObjectTemplate& object_vox, int col_x,
                       int col_y);

// Contact height and overflow for a drop without committing it.
DropResult settle_probe(const SettleGrid& grid, const ObjectTemplate& object_vox, int col_x,
                        int col_y);

enum class FillMode { random, raster };

struct FillOptions {
  int resolution = 128;      // settle cells along the longest interior side
  FillMode mode = FillMode::random;
  double fine_orientation_jitter_deg = 0.0;  // 0 = pure cube-group orientations
  int max_consecutive_rejects = 100;
  int drop_candidates = 8;  // random columns probed per drop; lowest rest wins
};

struct FillResult {
  SceneRecord record;
  SettleGrid settled;
};

// Fills the container with copies of `shape` dropped at seeded random columns
// and orientations (or in raster order for the exact-packing mode) until the
// target fill height is reached or drops keep overflowing the rim.
FillResult fill_container(const ContainerSpec& container, const TriMesh& shape, uint64_t seed,
                          double fill_fraction, const FillOptions& opt = {});

// Deterministic fixture: 0.1-cubes rastered into a unit container at settle
// resolution 100 — exactly 1000 objects at occupancy exactly 1.
FillResult perfect_packing_fixture();

// Occupancy ratio of the settled state: occupied cells over the interior slab
// up to the topmost occupied layer (0 for an empty scene).
double ground_truth_gamma(const VoxelGrid& occ, const ContainerSpec& container);

// (gamma over the full interior, gamma over the centered half-size sub-box).
std::pair<double, double> border_gamma(const VoxelGrid& occ, const ContainerSpec& container);

// Renderable labeled scene for a settled fill (container walls + floor as
// container label, stack as object label, analytic ground below).
LabeledScene realize_scene(const FillResult& fill);

// Rebuilds the settled occupancy from a stored record (template re-voxelized
// per placement); used to re-render persisted scenes.
LabeledScene realize_record(const SceneRecord& record);

// --------------------------------------------------------------------------
// Scene manifests (JSON, fixed field names) and dataset generation.

void write_manifest(const std::string& path, const SceneRecord& rec);
SceneRecord read_manifest(const std::string& path);

struct DatasetConfig {
  std::string out_dir;
  int scenes = 1000;
  uint64_t master_seed = 1;
  std::vector<ShapeFamily> families{kAllShapeFamilies.begin(), kAllShapeFamilies.end()};
  int shape_seeds_per_family = 5;  // distinct parameter draws per family
  double holdout_fraction = 0.1;   // fraction of shape ids reserved for validation
  Vec3 interior_lo{0.5, 0.5, 0.5}, interior_hi{0.8, 0.8, 0.8};
  double wall_thickness_ratio = 0.04;
  int settle_resolution = 128;
  int views = 30;
  int image_size = 256;   // key view render
  int probe_size = 160;   // mask renders used for key-view selection
  double camera_radius_factor = 2.2;  // camera distance over scene radius
  std::vector<double> fill_choices{0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  bool save_all_views = false;  // default persists the key view only
  uint64_t config_hash = 0;     // recorded in outputs; 0 = unset
};

struct DatasetSummary {
  int n_scenes = 0, n_train = 0, n_val = 0;
  double kappa0 = 0.0;  // complexity normalizer over the shape pool
  std::string index_path;
};

// Generates scene directories under config.out_dir: per scene a manifest,
// cameras, and rendered key-view depth + masks (all views when configured).
// Writes an NDJSON index plus a dataset.json header. Deterministic in
// (master_seed, config); scenes are independent and parallelize.
DatasetSummary dataset_generate(const DatasetConfig& config);

}  // namespace stackcount
