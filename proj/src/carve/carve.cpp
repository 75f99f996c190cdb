// Multi-view voxel carving. init_grid sizes a fully occupied grid from the
// back-projection of every view's masked depths; carve() cuts each
// x-contiguous voxel row against every view through the carve_row kernel;
// erode_container is a separable box-window min filter that spares the +up
// face; the unit-volume path is init + carve + count on a lone template.

#include "stackcount/carve.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "stackcount/kernels.h"

namespace stackcount {

namespace {

constexpr int kPad = 2;       // empty voxels kept around the carve region
constexpr double kRectPad = 2.0;  // pixels of slack in the cross-view overlap test

// Shifts a bit-packed row so dst bit x holds src bit x + s (zero fill beyond
// the row). Words past the source row never leak in: callers keep the
// padding-bit invariant by ANDing at least one unshifted copy.
void shift_row_into(const uint64_t* src, uint64_t* dst, int words, int s) {
  if (s >= 0) {
    int wq = s >> 6, wr = s & 63;
    for (int i = 0; i < words; ++i) {
      uint64_t v = 0;
      if (i + wq < words) {
        v = src[i + wq] >> wr;
        if (wr && i + wq + 1 < words) v |= src[i + wq + 1] << (64 - wr);
      }
      dst[i] = v;
    }
  } else {
    int wq = (-s) >> 6, wr = (-s) & 63;
    for (int i = words - 1; i >= 0; --i) {
      uint64_t v = 0;
      if (i - wq >= 0) {
        v = src[i - wq] << wr;
        if (wr && i - wq - 1 >= 0) v |= src[i - wq - 1] >> (64 - wr);
      }
      dst[i] = v;
    }
  }
}

// In-place 1D erosion along one axis: out(p) = AND of in(p + b), b in
// [blo, bhi], with everything outside the grid counting as empty.
void erode_axis(VoxelGrid& g, int axis, int blo, int bhi) {
  const std::vector<uint64_t> snap = g.bits;
  const int words = g.row_words;
  if (axis == 0) {
    std::vector<uint64_t> acc(words), tmp(words);
    for (int z = 0; z < g.nz; ++z)
      for (int y = 0; y < g.ny; ++y) {
        const uint64_t* src = snap.data() + g.row_index(y, z);
        std::memcpy(acc.data(), src, size_t(words) * 8);
        for (int s = blo; s <= bhi; ++s) {
          if (s == 0) continue;
          shift_row_into(src, tmp.data(), words, s);
          for (int i = 0; i < words; ++i) acc[i] &= tmp[i];
        }
        std::memcpy(g.row(y, z), acc.data(), size_t(words) * 8);
      }
    return;
  }
  for (int z = 0; z < g.nz; ++z)
    for (int y = 0; y < g.ny; ++y) {
      uint64_t* out = g.row(y, z);
      for (int b = blo; b <= bhi; ++b) {
        if (b == 0) continue;
        int yy = axis == 1 ? y + b : y;
        int zz = axis == 2 ? z + b : z;
        if (yy < 0 || yy >= g.ny || zz < 0 || zz >= g.nz) {
          std::memset(out, 0, size_t(words) * 8);
          break;
        }
        const uint64_t* nb = snap.data() + g.row_index(yy, zz);
        for (int i = 0; i < words; ++i) out[i] &= nb[i];
      }
    }
}

}  // namespace

void CarveInput::validate() const {
  if (cameras.empty()) fail(errc::config, "carve input needs at least one view");
  if (masks.size() != cameras.size() || depths.size() != cameras.size())
    fail(errc::config, "carve input arrays disagree on the view count");
  for (size_t i = 0; i < cameras.size(); ++i) {
    const Camera& c = cameras[i];
    if (c.width <= 0 || c.height <= 0 || c.fx == 0.0 || c.fy == 0.0)
      fail(errc::config, "carve camera " + std::to_string(i) + " is degenerate");
    if (masks[i].width != c.width || masks[i].height != c.height ||
        depths[i].width != c.width || depths[i].height != c.height)
      fail(errc::config, "carve view " + std::to_string(i) + " image sizes disagree");
  }
  if (resolution < 8) fail(errc::config, "carve resolution must be at least 8");
}

double carve_slack(double voxel) { return 1.5 * voxel * std::sqrt(3.0); }

VoxelGrid init_grid(const CarveInput& inputs) {
  inputs.validate();
  const size_t n_views = inputs.cameras.size();

  struct Rect {
    double u0 = 0, v0 = 0, u1 = 0, v1 = 0;
  };
  std::vector<Rect> rects(n_views);
  std::vector<AABB> regions(n_views);
  AABB all;
  for (size_t i = 0; i < n_views; ++i) {
    const Mask& m = inputs.masks[i];
    const DepthMap& d = inputs.depths[i];
    const Camera& cam = inputs.cameras[i];
    const Vec3 eye = cam.position();
    int iu0 = m.width, iu1 = -1, iv0 = m.height, iv1 = -1;
    for (int v = 0; v < m.height; ++v)
      for (int u = 0; u < m.width; ++u) {
        if (!m.get(u, v)) continue;
        iu0 = std::min(iu0, u);
        iu1 = std::max(iu1, u);
        iv0 = std::min(iv0, v);
        iv1 = std::max(iv1, v);
        float t = d.at(u, v);
        if (!(t > 0.0f) || !(t <= std::numeric_limits<float>::max())) continue;
        regions[i].expand(eye + double(t) * cam.ray_dir(u + 0.5, v + 0.5));
      }
    if (iu1 < 0)
      fail(errc::generation, "carve view " + std::to_string(i) + " has an empty mask");
    rects[i] = {double(iu0), double(iv0), double(iu1 + 1), double(iv1 + 1)};
    all.merge(regions[i]);
  }
  if (!all.valid()) fail(errc::generation, "no view has a finite depth inside its mask");

  // Cross-view consistency: each view's back-projected region must land on
  // every other view's mask rectangle, or the frusta cannot intersect.
  for (size_t i = 0; i < n_views; ++i) {
    if (!regions[i].valid()) continue;
    for (size_t j = 0; j < n_views; ++j) {
      if (j == i) continue;
      double u0 = 1e300, u1 = -1e300, v0 = 1e300, v1 = -1e300;
      bool any = false;
      for (int c = 0; c < 8; ++c) {
        Vec3 p{c & 1 ? regions[i].hi.x : regions[i].lo.x,
               c & 2 ? regions[i].hi.y : regions[i].lo.y,
               c & 4 ? regions[i].hi.z : regions[i].lo.z};
        double u, v, z;
        if (!inputs.cameras[j].project(p, &u, &v, &z)) continue;
        any = true;
        u0 = std::min(u0, u);
        u1 = std::max(u1, u);
        v0 = std::min(v0, v);
        v1 = std::max(v1, v);
      }
      if (!any || u1 < rects[j].u0 - kRectPad || u0 > rects[j].u1 + kRectPad ||
          v1 < rects[j].v0 - kRectPad || v0 > rects[j].v1 + kRectPad)
        fail(errc::generation, "mask frusta of views " + std::to_string(i) + " and " +
                                   std::to_string(j) + " do not intersect");
    }
  }

  const Vec3 ext = all.extent();
  const double longest = std::max({ext.x, ext.y, ext.z});
  if (!(longest > 0.0)) fail(errc::generation, "carve region is degenerate");
  const int covered = inputs.resolution - 2 * kPad;
  const double voxel = longest / covered;
  int dims[3];
  Vec3 origin;
  for (int a = 0; a < 3; ++a) {
    int cells = std::max(1, int(std::ceil(ext[a] / voxel - 1e-9)));
    dims[a] = cells + 2 * kPad;
    // Center the covered span so the rounded-up cell count stays symmetric.
    origin[a] = all.lo[a] - kPad * voxel - (cells * voxel - ext[a]) * 0.5;
  }
  VoxelGrid grid(dims[0], dims[1], dims[2], voxel, origin);
  grid.fill(true);
  return grid;
}

void carve(VoxelGrid& grid, const CarveInput& inputs) {
  inputs.validate();
  if (grid.bits.empty()) fail(errc::config, "carve needs an initialized grid");
  const auto& kt = kernels::active();
  const float slack = float(carve_slack(grid.voxel));
  for (size_t vi = 0; vi < inputs.cameras.size(); ++vi) {
    const Camera& cam = inputs.cameras[vi];
    const Mask& m = inputs.masks[vi];
    // The kernel gathers mask bytes four at a time; give it tail slack.
    std::vector<uint8_t> mask_padded(m.bits.size() + 4, 0);
    std::memcpy(mask_padded.data(), m.bits.data(), m.bits.size());

    kernels::CarveView base{};
    const Vec3 dq = cam.pose.R.col(0) * grid.voxel;
    base.dq[0] = float(dq.x);
    base.dq[1] = float(dq.y);
    base.dq[2] = float(dq.z);
    base.fx = float(cam.fx);
    base.fy = float(cam.fy);
    base.cx = float(cam.cx);
    base.cy = float(cam.cy);
    base.w = cam.width;
    base.h = cam.height;
    base.depth = inputs.depths[vi].depths.data();
    base.mask = mask_padded.data();
    base.slack = slack;

    parallel_for(int64_t(grid.ny) * grid.nz, default_threads(), [&](int64_t lo, int64_t hi) {
      kernels::CarveView view = base;
      for (int64_t r = lo; r < hi; ++r) {
        const int y = int(r % grid.ny), z = int(r / grid.ny);
        const Vec3 q0 = cam.pose.apply(grid.center_of(0, y, z));
        view.q0[0] = float(q0.x);
        view.q0[1] = float(q0.y);
        view.q0[2] = float(q0.z);
        kt.carve_row(view, grid.nx, grid.row(y, z));
      }
    });
  }
}

void erode_container(VoxelGrid& grid, double t_ratio, int up_axis) {
  if (!(t_ratio >= 0.0 && t_ratio < 0.5))
    fail(errc::config, "thickness ratio must be in [0, 0.5)");
  if (up_axis < 0 || up_axis > 2) fail(errc::config, "up axis must be 0, 1 or 2");
  int lo[3], hi[3];
  if (!grid.occupied_bounds(lo, hi)) fail(errc::generation, "cannot erode an empty grid");
  double lateral = 0;
  for (int a = 0; a < 3; ++a)
    if (a != up_axis) lateral = std::max(lateral, double(hi[a] - lo[a] + 1) * grid.voxel);
  const int r = int(std::ceil(t_ratio * lateral / grid.voxel - 1e-9));
  if (r <= 0) return;
  for (int a = 0; a < 3; ++a) {
    const int extent = hi[a] - lo[a] + 1;
    const int loss = a == up_axis ? r : 2 * r;
    if (loss >= extent)
      fail(errc::numeric, "erosion radius " + std::to_string(r) +
                              " consumes the occupied extent of axis " + std::to_string(a));
  }
  for (int a = 0; a < 3; ++a) erode_axis(grid, a, -r, a == up_axis ? 0 : r);
}

VolumeEstimate grid_volume(const VoxelGrid& grid) {
  VolumeEstimate est;
  est.voxel_count = grid.count();
  est.volume = double(est.voxel_count) * grid.voxel * grid.voxel * grid.voxel;
  est.resolution = std::max({grid.nx, grid.ny, grid.nz});
  return est;
}

double unit_volume_from_template(const CarveInput& inputs, double convexity_correction) {
  inputs.validate();
  if (inputs.cameras.size() < 6)
    fail(errc::config, "unit volume needs at least 6 template views");
  if (!(convexity_correction >= 0.0 && convexity_correction < 1.0))
    fail(errc::config, "convexity correction must be in [0, 1)");
  VoxelGrid grid = init_grid(inputs);
  carve(grid, inputs);
  const double v = grid_volume(grid).volume;
  if (!(v > 0.0)) fail(errc::numeric, "template carved away to nothing");
  return v * (1.0 - convexity_correction);
}

}  // namespace stackcount
