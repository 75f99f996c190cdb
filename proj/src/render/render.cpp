#include "stackcount/render.h"

#include <algorithm>
#include <cmath>

namespace stackcount {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct RayHit {
  double t = -1.0;  // entry depth; negative means miss
  uint8_t label = 0;
};

// First nonzero cell along o + t*d, t >= 0, over an nx*ny*nz grid of `voxel`
// cubes anchored at `origin`. The returned t is the entry depth into the hit
// cell (0 when the ray starts inside one). cell(ix,iy,iz) -> uint8_t label.
template <class CellFn>
RayHit trace_cells(const Vec3& o, const Vec3& d, const Vec3& origin, double voxel,
                   int nx, int ny, int nz, CellFn cell) {
  if (nx <= 0 || ny <= 0 || nz <= 0) return {};
  const double ov[3] = {o.x, o.y, o.z};
  const double dv[3] = {d.x, d.y, d.z};
  const double lo[3] = {origin.x, origin.y, origin.z};
  const double hi[3] = {origin.x + nx * voxel, origin.y + ny * voxel, origin.z + nz * voxel};
  const int dims[3] = {nx, ny, nz};

  double t0 = 0.0, t1 = kInf;
  for (int a = 0; a < 3; ++a) {
    if (dv[a] != 0.0) {
      double inv = 1.0 / dv[a];
      double ta = (lo[a] - ov[a]) * inv, tb = (hi[a] - ov[a]) * inv;
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    } else if (ov[a] < lo[a] || ov[a] >= hi[a]) {
      return {};
    }
  }
  if (t0 > t1) return {};

  int idx[3], step[3];
  double tmax[3], tdelta[3];
  for (int a = 0; a < 3; ++a) {
    double p = ov[a] + dv[a] * t0;
    idx[a] = std::clamp(int(std::floor((p - lo[a]) / voxel)), 0, dims[a] - 1);
    if (dv[a] > 0) {
      step[a] = 1;
      tdelta[a] = voxel / dv[a];
      tmax[a] = (lo[a] + (idx[a] + 1) * voxel - ov[a]) / dv[a];
    } else if (dv[a] < 0) {
      step[a] = -1;
      tdelta[a] = voxel / -dv[a];
      tmax[a] = (lo[a] + idx[a] * voxel - ov[a]) / dv[a];
    } else {
      step[a] = 0;
      tdelta[a] = tmax[a] = kInf;
    }
  }

  double t = t0;
  for (;;) {
    uint8_t c = cell(idx[0], idx[1], idx[2]);
    if (c) return {t, c};
    int a = (tmax[0] <= tmax[1]) ? (tmax[0] <= tmax[2] ? 0 : 2) : (tmax[1] <= tmax[2] ? 1 : 2);
    t = tmax[a];
    idx[a] += step[a];
    if (unsigned(idx[a]) >= unsigned(dims[a])) return {};
    tmax[a] += tdelta[a];
  }
}

// Ground-plane hit depth for the labeled renderer; negative means none.
double ground_hit(const Vec3& o, const Vec3& d, double ground_z) {
  if (d.z == 0.0) return -1.0;
  double t = (ground_z - o.z) / d.z;
  return t > 0.0 ? t : -1.0;
}

}  // namespace

int64_t Mask::count() const {
  int64_t n = 0;
  for (uint8_t b : bits) n += b != 0;
  return n;
}

Vec3 Camera::ray_dir(double u, double v) const {
  double dx = (u - cx) / fx, dy = (v - cy) / fy;
  // R^T * (dx, dy, 1): rows of R are the camera axes in world space.
  return pose.R.row(0) * dx + pose.R.row(1) * dy + pose.R.row(2);
}

bool Camera::project(const Vec3& p, double* u, double* v, double* z) const {
  Vec3 q = pose.apply(p);
  if (q.z < 1e-12) return false;
  *u = q.x / q.z * fx + cx;
  *v = q.y / q.z * fy + cy;
  *z = q.z;
  return true;
}

Rigid look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  Vec3 f = target - eye;
  if (norm(f) < 1e-12) fail(errc::config, "look_at: eye coincides with target");
  f = normalized(f);
  Vec3 r = cross(f, up);
  if (norm(r) < 1e-9) r = cross(f, {0, 1, 0});
  if (norm(r) < 1e-9) r = cross(f, {1, 0, 0});
  r = normalized(r);
  Vec3 dn = cross(f, r);  // unit by construction
  Rigid rt;
  rt.R = Mat3::from_rows(r, dn, f);
  rt.t = -(rt.R * eye);
  return rt;
}

std::vector<Camera> make_view_ring(int n, double radius, const Vec3& center,
                                   double elev_lo_deg, double elev_hi_deg, uint64_t seed,
                                   const ViewRingOptions& opt) {
  if (n < 1) fail(errc::config, "make_view_ring: need at least one view");
  if (radius <= 0.0) fail(errc::config, "make_view_ring: radius must be positive");
  if (radius <= opt.scene_radius)
    fail(errc::config, "make_view_ring: camera radius " + format_double(radius) +
                           " is inside the scene bounds " + format_double(opt.scene_radius));
  if (!(elev_lo_deg <= elev_hi_deg) || elev_lo_deg < -90.0 || elev_hi_deg > 90.0)
    fail(errc::config, "make_view_ring: bad elevation range");
  if (!(opt.fov_deg > 0.0 && opt.fov_deg < 180.0) || opt.width < 1 || opt.height < 1)
    fail(errc::config, "make_view_ring: bad image options");

  const double deg = 3.14159265358979323846 / 180.0;
  const double golden = 2.399963229728653;  // pi * (3 - sqrt 5)
  double f = (opt.height / 2.0) / std::tan(opt.fov_deg * deg / 2.0);

  Camera base;
  base.fx = base.fy = f;
  base.cx = opt.width / 2.0;
  base.cy = opt.height / 2.0;
  base.width = opt.width;
  base.height = opt.height;

  std::vector<Camera> cams;
  cams.reserve(size_t(n));
  Camera nadir = base;
  nadir.pose = look_at(center + Vec3{0, 0, radius}, center);
  cams.push_back(nadir);

  Rng rng(seed);
  for (int j = 0; j + 1 < n; ++j) {
    double az = j * golden + rng.uniform(0.0, 0.3);
    double ev = elev_lo_deg + (elev_hi_deg - elev_lo_deg) * ((j + 0.5) / (n - 1)) +
                rng.uniform(-1.5, 1.5);
    ev = std::clamp(ev, elev_lo_deg, elev_hi_deg) * deg;
    Vec3 eye = center + Vec3{radius * std::cos(ev) * std::cos(az),
                             radius * std::cos(ev) * std::sin(az), radius * std::sin(ev)};
    Camera c = base;
    c.pose = look_at(eye, center);
    cams.push_back(c);
  }
  return cams;
}

DepthMap render_depth(const VoxelGrid& grid, const Camera& cam) {
  Vec3 o = cam.position();
  if (grid.inside_point(o) && grid.get_point(o))
    fail(errc::generation, "render_depth: camera is inside an occupied voxel");

  DepthMap out(cam.width, cam.height);
  auto cell = [&grid](int x, int y, int z) -> uint8_t { return grid.get(x, y, z) ? 1 : 0; };
  parallel_for(cam.height, default_threads(), [&](int64_t v0, int64_t v1) {
    for (int64_t v = v0; v < v1; ++v) {
      Vec3 row_base = cam.pose.R.row(1) * ((v + 0.5 - cam.cy) / cam.fy) + cam.pose.R.row(2);
      for (int u = 0; u < cam.width; ++u) {
        Vec3 d = cam.pose.R.row(0) * ((u + 0.5 - cam.cx) / cam.fx) + row_base;
        RayHit h = trace_cells(o, d, grid.origin, grid.voxel, grid.nx, grid.ny, grid.nz, cell);
        if (h.t >= 0.0) out.at(u, int(v)) = float(h.t);
      }
    }
  });
  return out;
}

ViewRender render_view(const LabeledScene& scene, const Camera& cam) {
  const ByteGrid& g = scene.cells;
  Vec3 o = cam.position();
  if (g.inside_point(o) && g.at_point(o) != kLabelEmpty)
    fail(errc::generation, "render_view: camera is inside an occupied voxel");

  ViewRender out;
  out.depth = DepthMap(cam.width, cam.height);
  out.object_mask = Mask(cam.width, cam.height);
  out.container_mask = Mask(cam.width, cam.height);

  auto cell = [&g](int x, int y, int z) -> uint8_t { return g.at(x, y, z); };
  parallel_for(cam.height, default_threads(), [&](int64_t v0, int64_t v1) {
    for (int64_t v = v0; v < v1; ++v) {
      Vec3 row_base = cam.pose.R.row(1) * ((v + 0.5 - cam.cy) / cam.fy) + cam.pose.R.row(2);
      for (int u = 0; u < cam.width; ++u) {
        Vec3 d = cam.pose.R.row(0) * ((u + 0.5 - cam.cx) / cam.fx) + row_base;
        RayHit h = trace_cells(o, d, g.origin, g.voxel, g.nx, g.ny, g.nz, cell);
        if (scene.has_ground) {
          double tg = ground_hit(o, d, scene.ground_z);
          if (tg >= 0.0 && (h.t < 0.0 || tg < h.t)) h = {tg, kLabelGround};
        }
        if (h.t < 0.0) continue;
        out.depth.at(u, int(v)) = float(h.t);
        if (h.label == kLabelObject) out.object_mask.set(u, int(v), true);
        else if (h.label == kLabelContainer) out.container_mask.set(u, int(v), true);
      }
    }
  });
  return out;
}

std::pair<Mask, Mask> render_masks(const LabeledScene& scene, const Camera& cam) {
  ViewRender r = render_view(scene, cam);
  return {std::move(r.object_mask), std::move(r.container_mask)};
}

int select_key_view(const std::vector<Mask>& object_masks) {
  if (object_masks.empty()) fail(errc::config, "select_key_view: no views");
  int best = -1;
  int64_t best_count = 0;
  for (size_t i = 0; i < object_masks.size(); ++i) {
    int64_t c = object_masks[i].count();
    if (c > best_count) {
      best = int(i);
      best_count = c;
    }
  }
  if (best < 0) fail(errc::generation, "select_key_view: no objects visible in any view");
  return best;
}

CropResult crop_to_mask(const DepthMap& depth, const Mask& mask, int out_size) {
  if (depth.width != mask.width || depth.height != mask.height)
    fail(errc::config, "crop_to_mask: depth/mask size mismatch");
  if (out_size < 1) fail(errc::config, "crop_to_mask: bad output size");

  int u0 = depth.width, u1 = -1, v0 = depth.height, v1 = -1;
  float fill = -kNoHit;
  for (int v = 0; v < mask.height; ++v)
    for (int u = 0; u < mask.width; ++u) {
      if (!mask.get(u, v)) continue;
      u0 = std::min(u0, u);
      u1 = std::max(u1, u);
      v0 = std::min(v0, v);
      v1 = std::max(v1, v);
      float d = depth.at(u, v);
      if (d != kNoHit) fill = std::max(fill, d);
    }
  if (u1 < 0) fail(errc::generation, "crop_to_mask: empty mask");
  if (fill == -kNoHit) fail(errc::generation, "crop_to_mask: mask covers no finite depth");

  int bw = u1 - u0 + 1, bh = v1 - v0 + 1;
  CropResult out;
  out.depth = DepthMap(out_size, out_size, fill);
  out.valid = Mask(out_size, out_size);
  for (int oy = 0; oy < out_size; ++oy) {
    int sv = v0 + std::min(bh - 1, int((oy + 0.5) * bh / out_size));
    for (int ox = 0; ox < out_size; ++ox) {
      int su = u0 + std::min(bw - 1, int((ox + 0.5) * bw / out_size));
      if (mask.get(su, sv)) {
        out.depth.at(ox, oy) = depth.at(su, sv);
        out.valid.set(ox, oy, true);
      }
    }
  }
  return out;
}

}  // namespace stackcount
