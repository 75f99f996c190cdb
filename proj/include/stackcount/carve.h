#pragma once
// Multi-view voxel carving: a fully occupied grid sized from the views is cut
// down to the set of voxel centers consistent with every view's content mask
// and depth map, then the container rim is shaved off by a thickness ratio and
// the survivors are counted into a volume.

#include <cstdint>
#include <string>
#include <vector>

#include "stackcount/geometry.h"
#include "stackcount/grid.h"
#include "stackcount/render.h"
#include "stackcount/util.h"

namespace stackcount {

// One content mask (objects plus container) and one depth map per camera.
struct CarveInput {
  std::vector<Camera> cameras;
  std::vector<Mask> masks;
  std::vector<DepthMap> depths;
  int resolution = 128;  // voxels along the grid's longest axis, pad included

  void validate() const;  // sizes consistent, >= 1 view, resolution sane
};

struct VolumeEstimate {
  double volume = 0.0;  // scene units cubed: voxel_count * voxel^3
  uint64_t voxel_count = 0;
  int resolution = 0;  // voxels along the longest grid axis
};

// Fully occupied grid covering the back-projection of every view's masked
// depths, padded by two voxels on each side. Views whose masks hold no finite
// depth contribute no bounds. Errors when a mask is empty, when no view has a
// finite masked depth, or when the per-view regions are mutually inconsistent
// (disjoint mask frusta).
VoxelGrid init_grid(const CarveInput& inputs);

// Carves `grid` in place: a voxel survives only if, in every view, its center
// projects inside the image, lands on a masked pixel, and is no more than one
// depth slack in front of that pixel's depth reading. Slack is 1.5 voxel
// diagonals, which keeps surface voxels from carving themselves through
// quantization. Deterministic for any thread count (rows are independent).
void carve(VoxelGrid& grid, const CarveInput& inputs);

// Depth slack used by carve() for a given voxel edge length.
double carve_slack(double voxel);

// Erodes every face of the occupied set except +up by
// ceil(t_ratio * lateral extent / voxel) voxels (separable min filter).
// up_axis: 0 = x, 1 = y, 2 = z. Errors when the radius would consume the
// grid's occupied extent.
void erode_container(VoxelGrid& grid, double t_ratio, int up_axis = 2);

VolumeEstimate grid_volume(const VoxelGrid& grid);

// Carved volume of one isolated template object from >= 6 views. The optional
// convexity correction scales the visual-hull volume down by a caller-supplied
// hull-deficit fraction (0 = off, the default).
double unit_volume_from_template(const CarveInput& inputs, double convexity_correction = 0.0);

// Binary voxel dump: magic "VOX1", dims, voxel size, origin, the bit-packed
// occupancy words, and a trailing CRC32. Round-trips bit-exactly.
void save_voxels(const std::string& path, const VoxelGrid& grid);
VoxelGrid load_voxels(const std::string& path);

// Boundary surface of the occupied set as a triangle mesh (two triangles per
// exposed voxel face, shared corner vertices); for OBJ export and inspection.
TriMesh voxel_surface_mesh(const VoxelGrid& grid);

}  // namespace stackcount
