#include <algorithm>

#include "stackcount/scenegen.h"

namespace stackcount {
namespace {

// First contact: the template's lowest voxel in some column meets that
// column's stack top. Templates are trimmed, so rest >= 0.
DropResult contact(const SettleGrid& grid, const ObjectTemplate& tpl, int col_x, int col_y) {
  const VoxelGrid& t = tpl.vox;
  if (col_x < 0 || col_y < 0 || col_x + t.nx > grid.occ.nx || col_y + t.ny > grid.occ.ny)
    fail(errc::config, "drop column outside container footprint");
  int rest = 0, max_top = 0;
  for (int hy = 0; hy < t.ny; ++hy)
    for (int hx = 0; hx < t.nx; ++hx) {
      size_t c = size_t(hy) * t.nx + hx;
      if (tpl.bottom[c] < 0) continue;
      rest = std::max(rest, grid.height_at(col_x + hx, col_y + hy) - tpl.bottom[c]);
      max_top = std::max(max_top, tpl.top[c]);
    }
  DropResult r;
  r.x = col_x;
  r.y = col_y;
  r.z = rest;
  r.overflow = rest + max_top >= grid.rim;
  return r;
}

}  // namespace

void ObjectTemplate::rebuild_profiles() {
  size_t cols = size_t(vox.nx) * vox.ny;
  bottom.assign(cols, -1);
  top.assign(cols, -1);
  for (int z = 0; z < vox.nz; ++z)
    for (int y = 0; y < vox.ny; ++y)
      for (int x = 0; x < vox.nx; ++x) {
        if (!vox.get(x, y, z)) continue;
        size_t c = size_t(y) * vox.nx + x;
        if (bottom[c] < 0) bottom[c] = z;
        top[c] = z;
      }
}

ObjectTemplate make_template(const TriMesh& mesh, const Quat& orientation, double voxel) {
  VoxelGrid raw = voxelize_fit(mesh, Rigid{mat_from_quat(orientation), {0, 0, 0}}, voxel);
  int lo[3], hi[3];
  if (!raw.occupied_bounds(lo, hi))
    fail(errc::generation, "object template is empty at this voxel size");
  ObjectTemplate t;
  t.orientation = orientation;
  t.vox = VoxelGrid(hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1, raw.voxel,
                    {raw.origin.x + lo[0] * raw.voxel, raw.origin.y + lo[1] * raw.voxel,
                     raw.origin.z + lo[2] * raw.voxel});
  for (int z = 0; z < t.vox.nz; ++z)
    for (int y = 0; y < t.vox.ny; ++y)
      for (int x = 0; x < t.vox.nx; ++x)
        if (raw.get(x + lo[0], y + lo[1], z + lo[2])) t.vox.set(x, y, z, true);
  t.rebuild_profiles();
  return t;
}

SettleGrid::SettleGrid(int nx, int ny, int nz, double voxel)
    : occ(nx, ny, nz, voxel, {0, 0, 0}), height(size_t(nx) * ny, 0), rim(nz) {}

DropResult settle_probe(const SettleGrid& grid, const ObjectTemplate& object_vox, int col_x,
                        int col_y) {
  return contact(grid, object_vox, col_x, col_y);
}

DropResult settle_drop(SettleGrid& grid, const ObjectTemplate& object_vox, int col_x,
                       int col_y) {
  DropResult r = contact(grid, object_vox, col_x, col_y);
  if (r.overflow) return r;

  const VoxelGrid& t = object_vox.vox;
  for (int hz = 0; hz < t.nz; ++hz)
    for (int hy = 0; hy < t.ny; ++hy)
      for (int hx = 0; hx < t.nx; ++hx)
        if (t.get(hx, hy, hz)) grid.occ.set(col_x + hx, col_y + hy, r.z + hz, true);
  for (int hy = 0; hy < t.ny; ++hy)
    for (int hx = 0; hx < t.nx; ++hx) {
      size_t c = size_t(hy) * t.nx + hx;
      if (object_vox.top[c] < 0) continue;
      int& h = grid.height_at(col_x + hx, col_y + hy);
      int lifted = std::max(h, r.z + object_vox.top[c] + 1);
      grid.height_sum += lifted - h;
      h = lifted;
    }
  r.placed = true;
  return r;
}

}  // namespace stackcount
