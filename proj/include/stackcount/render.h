#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "stackcount/grid.h"
#include "stackcount/util.h"

namespace stackcount {

// Depth value for rays that hit nothing.
inline constexpr float kNoHit = std::numeric_limits<float>::infinity();

// Voxel labels used by the labeled renderer. Ground is analytic (a plane, not
// voxels) but shows up as a hit label.
inline constexpr uint8_t kLabelEmpty = 0;
inline constexpr uint8_t kLabelObject = 1;
inline constexpr uint8_t kLabelContainer = 2;
inline constexpr uint8_t kLabelGround = 3;

struct DepthMap {
  int width = 0, height = 0;
  std::vector<float> depths;  // row-major; kNoHit where no surface was hit

  DepthMap() = default;
  DepthMap(int w, int h, float fill = kNoHit)
      : width(w), height(h), depths(size_t(w) * size_t(h), fill) {}
  float at(int u, int v) const { return depths[size_t(v) * width + u]; }
  float& at(int u, int v) { return depths[size_t(v) * width + u]; }
};

struct Mask {
  int width = 0, height = 0;
  std::vector<uint8_t> bits;  // row-major; 0 or 1

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), bits(size_t(w) * size_t(h), 0) {}
  bool get(int u, int v) const { return bits[size_t(v) * width + u] != 0; }
  void set(int u, int v, bool on) { bits[size_t(v) * width + u] = on ? 1 : 0; }
  int64_t count() const;
};

// Pinhole camera. `pose` maps world to camera coordinates; the camera looks
// along +z with x right and y down (image convention). The ray through pixel
// (u, v) passes through the pixel center, and its parameter equals camera-space
// z-depth (the direction is normalized to unit forward component, not unit
// length).
struct Camera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  Rigid pose;

  Vec3 position() const { return pose.inverse().t; }
  // World-space ray direction through pixel coordinates (u, v) measured at the
  // pixel center, i.e. pass u + 0.5 for column u.
  Vec3 ray_dir(double u, double v) const;
  // Projects a world point; returns false behind the camera. u/v are float
  // pixel coordinates (pixel (i, j) covers [i, i+1) x [j, j+1)), z is depth.
  bool project(const Vec3& p, double* u, double* v, double* z) const;
};

// World-to-camera pose looking from eye toward target. `up` fixes the roll;
// if it is parallel to the view direction a fixed fallback (+y) is used.
Rigid look_at(const Vec3& eye, const Vec3& target, const Vec3& up = {0, 0, 1});

struct ViewRingOptions {
  int width = 256, height = 256;
  double fov_deg = 50.0;      // full vertical field of view
  double scene_radius = 0.0;  // cameras must stay strictly outside this sphere
};

// n cameras at distance `radius` from `center`, all looking at it. Camera 0 is
// the straight-down view; the rest spread azimuths by the golden angle with
// seeded jitter, elevations over [elev_lo_deg, elev_hi_deg] above the horizon.
std::vector<Camera> make_view_ring(int n, double radius, const Vec3& center,
                                   double elev_lo_deg, double elev_hi_deg, uint64_t seed,
                                   const ViewRingOptions& opt = {});

// Voxel scene with per-cell labels plus an analytic ground plane at world
// z = ground_z (cheaper and cleaner than paving voxels under everything).
struct LabeledScene {
  ByteGrid cells;
  double ground_z = 0.0;
  bool has_ground = true;
};

struct ViewRender {
  DepthMap depth;
  Mask object_mask, container_mask;
};

// First-hit depth per pixel over an unlabeled grid. An empty grid yields an
// all-invalid map; a camera placed inside an occupied voxel is an error.
DepthMap render_depth(const VoxelGrid& grid, const Camera& cam);

// Depth plus object/container masks (first-hit label per pixel).
ViewRender render_view(const LabeledScene& scene, const Camera& cam);
std::pair<Mask, Mask> render_masks(const LabeledScene& scene, const Camera& cam);

// Index of the mask with the most set pixels; ties break to the lowest index.
// All-empty input is an error (nothing visible to count).
int select_key_view(const std::vector<Mask>& object_masks);

struct CropResult {
  DepthMap depth;  // out_size x out_size
  Mask valid;      // 1 where the sampled source pixel was masked
};

// Crops `depth` to the tight bounding rectangle of `mask` and resamples it to
// out_size x out_size with nearest-neighbor. Pixels sampled outside the mask
// are filled with the masked region's maximum depth.
CropResult crop_to_mask(const DepthMap& depth, const Mask& mask, int out_size);

// --------------------------------------------------------------------------
// Image and camera file I/O.
//
// Depth maps: PFM, grayscale "Pf", little-endian (negative scale), bottom-up
// row order. Masks: binary PGM "P5", maxval 255, 0 = background, 255 = set.
// Cameras: JSON array of {fx, fy, cx, cy, w, h, R (row-major 9), t (3)}.

void write_pfm(const std::string& path, const DepthMap& d);
DepthMap read_pfm(const std::string& path);
void write_pgm(const std::string& path, const Mask& m);
Mask read_pgm(const std::string& path);
void write_cameras_json(const std::string& path, const std::vector<Camera>& cams);
std::vector<Camera> read_cameras_json(const std::string& path);

}  // namespace stackcount
