#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "stackcount/scenegen.h"

namespace stackcount {
namespace {

// Interior grid dimensions for a container at a given settle resolution.
void interior_dims(const ContainerSpec& c, int resolution, double& s, int dims[3]) {
  double longest = std::max({c.interior.x, c.interior.y, c.interior.z});
  s = longest / resolution;
  dims[0] = std::max(1, int(std::lround(c.interior.x / s)));
  dims[1] = std::max(1, int(std::lround(c.interior.y / s)));
  dims[2] = std::max(1, int(std::lround(c.interior.z / s)));
}

int wall_cells(const ContainerSpec& c, double s) {
  if (c.kind == ContainerSpec::Kind::none) return 0;
  return std::max(1, int(std::lround(c.wall() / s)));
}

// Canonical world placement: container base on the ground plane z = 0,
// footprint centered on the origin.
Rigid canonical_pose(double s, const int dims[3], int wv) {
  return Rigid::translate({-0.5 * dims[0] * s, -0.5 * dims[1] * s, wv * s});
}

Quat compose(const Quat& a, const Quat& b) {  // rotation a then b
  return quat_from_mat(mat_from_quat(b) * mat_from_quat(a));
}

int topmost_layer(const VoxelGrid& occ) {
  int lo[3], hi[3];
  return occ.occupied_bounds(lo, hi) ? hi[2] + 1 : 0;
}

}  // namespace

void ContainerSpec::validate() const {
  if (!(interior.x > 0 && interior.y > 0 && interior.z > 0))
    fail(errc::config, "container interior must be positive");
  if (kind == Kind::box && !(wall_thickness_ratio > 0 && wall_thickness_ratio < 0.5))
    fail(errc::config, "container wall thickness ratio out of range (0, 0.5)");
}

FillResult fill_container(const ContainerSpec& container, const TriMesh& shape, uint64_t seed,
                          double fill_fraction, const FillOptions& opt) {
  container.validate();
  if (!(fill_fraction > 0.0 && fill_fraction <= 1.0))
    fail(errc::config, "fill fraction out of range (0, 1]");
  if (opt.resolution < 8) fail(errc::config, "settle resolution too small");

  double s;
  int dims[3];
  interior_dims(container, opt.resolution, s, dims);
  FillResult out;
  out.settled = SettleGrid(dims[0], dims[1], dims[2], s);
  SettleGrid& grid = out.settled;

  const auto& orients = cube_orientations();
  std::vector<ObjectTemplate> cache(orients.size());
  std::vector<char> built(orients.size(), 0);
  auto tpl_for = [&](size_t i) -> const ObjectTemplate& {
    if (!built[i]) {
      cache[i] = make_template(shape, orients[i], s);
      built[i] = 1;
    }
    return cache[i];
  };

  ObjectTemplate unit = make_template(shape, Quat{}, s);
  if (unit.vox.nx > dims[0] || unit.vox.ny > dims[1] || unit.vox.nz > dims[2])
    fail(errc::generation, "object does not fit inside the container");

  if (opt.drop_candidates < 1) fail(errc::config, "drop candidate count must be >= 1");
  Rng rng(Rng::stream(seed, 0x66696c6c));  // independent fill stream
  // Filled when the mean column height reaches the target fraction.
  const double target_height = fill_fraction * dims[2];
  int rejects = 0;
  long drops = 0;
  const long kMaxDrops = 500000;
  std::vector<std::array<double, 7>>& placements = out.record.placements;

  while (grid.mean_height() < target_height - 1e-9 &&
         rejects < opt.max_consecutive_rejects && drops < kMaxDrops) {
    ++drops;
    const ObjectTemplate* tpl = nullptr;
    ObjectTemplate scratch;
    if (opt.mode == FillMode::raster) {
      tpl = &unit;
    } else {
      size_t oi = size_t(rng.below(orients.size()));
      if (opt.fine_orientation_jitter_deg > 0) {
        double j = opt.fine_orientation_jitter_deg * (3.14159265358979323846 / 180.0);
        Mat3 fine = Mat3::rot_z(rng.uniform(-j, j)) * Mat3::rot_y(rng.uniform(-j, j)) *
                    Mat3::rot_x(rng.uniform(-j, j));
        scratch = make_template(shape, compose(orients[oi], quat_from_mat(fine)), s);
        tpl = &scratch;
      } else {
        tpl = &tpl_for(oi);
      }
    }

    int fx = tpl->vox.nx, fy = tpl->vox.ny;
    if (fx > dims[0] || fy > dims[1]) {
      ++rejects;
      continue;
    }
    int cx, cy;
    if (opt.mode == FillMode::raster) {
      long cols_x = dims[0] / fx;
      long cols_y = dims[1] / fy;
      long pos = (drops - 1) % (cols_x * cols_y);
      cx = int(pos % cols_x) * fx;
      cy = int(pos / cols_x) * fy;
    } else {
      // Gravity preference: probe a few columns, keep the lowest resting spot.
      // The draw count per attempt is fixed, so the stream stays aligned.
      cx = cy = 0;
      int best = -1;
      for (int k = 0; k < opt.drop_candidates; ++k) {
        int tx = int(rng.below(uint64_t(dims[0] - fx + 1)));
        int ty = int(rng.below(uint64_t(dims[1] - fy + 1)));
        int rest = settle_probe(grid, *tpl, tx, ty).z;
        if (best < 0 || rest < best) {
          best = rest;
          cx = tx;
          cy = ty;
        }
      }
    }

    DropResult r = settle_drop(grid, *tpl, cx, cy);
    if (!r.placed) {
      ++rejects;
      continue;
    }
    rejects = 0;
    const Quat& q = tpl->orientation;
    Vec3 tl{s * r.x - tpl->vox.origin.x, s * r.y - tpl->vox.origin.y,
            s * r.z - tpl->vox.origin.z};
    placements.push_back({q.w, q.x, q.y, q.z, tl.x, tl.y, tl.z});
  }

  SceneRecord& rec = out.record;
  rec.seed = seed;
  rec.n_objects = int(placements.size());
  rec.container = container;
  int wv = wall_cells(container, s);
  rec.container.pose = canonical_pose(s, dims, wv);
  for (auto& p : placements) {  // lift local placements into the world frame
    p[4] += rec.container.pose.t.x;
    p[5] += rec.container.pose.t.y;
    p[6] += rec.container.pose.t.z;
  }
  rec.fill_fraction = fill_fraction;
  rec.settle_resolution = opt.resolution;
  rec.settle_voxel = s;
  rec.unit_volume = double(unit.vox.count()) * s * s * s;
  rec.gamma_gt = ground_truth_gamma(grid.occ, rec.container);
  auto border = border_gamma(grid.occ, rec.container);
  rec.gamma_full = border.first;
  rec.gamma_no_edges = border.second;
  return out;
}

FillResult perfect_packing_fixture() {
  ContainerSpec c;
  c.interior = {1, 1, 1};
  FillOptions opt;
  opt.resolution = 100;
  opt.mode = FillMode::raster;
  FillResult r = fill_container(c, box_mesh(0.1, 0.1, 0.1), 0, 1.0, opt);
  r.record.shape_id = "fixture:cube0.1";
  r.record.scene_id = "perfect-packing";
  return r;
}

double ground_truth_gamma(const VoxelGrid& occ, const ContainerSpec& container) {
  container.validate();
  int z_top = topmost_layer(occ);
  if (z_top == 0) return 0.0;
  double denom = double(occ.nx) * occ.ny * z_top;
  return double(occ.count()) / denom;
}

std::pair<double, double> border_gamma(const VoxelGrid& occ, const ContainerSpec& container) {
  container.validate();
  double full = double(occ.count()) / (double(occ.nx) * occ.ny * occ.nz);
  int x0 = occ.nx / 4, y0 = occ.ny / 4, z0 = occ.nz / 4;
  int x1 = x0 + occ.nx / 2, y1 = y0 + occ.ny / 2, z1 = z0 + occ.nz / 2;
  uint64_t inner = 0;
  for (int z = z0; z < z1; ++z)
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) inner += occ.get(x, y, z);
  double cells = double(x1 - x0) * (y1 - y0) * (z1 - z0);
  return {full, cells > 0 ? double(inner) / cells : 0.0};
}

LabeledScene realize_scene(const FillResult& fill) {
  const SceneRecord& rec = fill.record;
  const VoxelGrid& occ = fill.settled.occ;
  double s = occ.voxel;
  const Rigid& pose = rec.container.pose;
  double rot_dev = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) rot_dev += std::abs(pose.R(i, j) - (i == j ? 1.0 : 0.0));
  if (rot_dev > 1e-12) fail(errc::config, "scene realization requires an axis-aligned container");

  int wv = wall_cells(rec.container, s);
  LabeledScene scene;
  scene.ground_z = pose.t.z - wv * s;
  scene.has_ground = true;
  scene.cells = ByteGrid(occ.nx + 2 * wv, occ.ny + 2 * wv, occ.nz + wv, s,
                         {pose.t.x - wv * s, pose.t.y - wv * s, scene.ground_z});

  if (rec.container.kind == ContainerSpec::Kind::box) {
    for (int z = 0; z < wv; ++z)
      for (int y = 0; y < scene.cells.ny; ++y)
        for (int x = 0; x < scene.cells.nx; ++x) scene.cells.put(x, y, z, kLabelContainer);
    for (int z = wv; z < scene.cells.nz; ++z)
      for (int y = 0; y < scene.cells.ny; ++y)
        for (int x = 0; x < scene.cells.nx; ++x) {
          bool wall = x < wv || x >= wv + occ.nx || y < wv || y >= wv + occ.ny;
          if (wall) scene.cells.put(x, y, z, kLabelContainer);
        }
  }
  for (int z = 0; z < occ.nz; ++z)
    for (int y = 0; y < occ.ny; ++y)
      for (int x = 0; x < occ.nx; ++x)
        if (occ.get(x, y, z)) scene.cells.put(x + wv, y + wv, z + wv, kLabelObject);
  return scene;
}

LabeledScene realize_record(const SceneRecord& record) {
  auto colon = record.shape_id.find(':');
  if (colon == std::string::npos)
    fail(errc::config, "scene record has no parseable shape id: " + record.shape_id);
  TriMesh shape;
  if (record.shape_id == "fixture:cube0.1") {
    shape = box_mesh(0.1, 0.1, 0.1);
  } else {
    ShapeFamily fam = shape_family_from_string(record.shape_id.substr(0, colon));
    shape = generate_shape(fam, std::stoull(record.shape_id.substr(colon + 1)));
  }

  if (record.settle_resolution < 8 || record.settle_voxel <= 0)
    fail(errc::config, "scene record is missing settle parameters");
  double s;
  int dims[3];
  interior_dims(record.container, record.settle_resolution, s, dims);
  if (std::abs(s - record.settle_voxel) > 1e-12 * s)
    fail(errc::config, "scene record voxel size disagrees with its resolution");

  FillResult fill;
  fill.record = record;
  fill.settled = SettleGrid(dims[0], dims[1], dims[2], s);
  VoxelGrid& occ = fill.settled.occ;

  std::vector<ObjectTemplate> cache;
  auto tpl_for = [&](const Quat& q) -> const ObjectTemplate& {
    for (const auto& t : cache) {
      const Quat& o = t.orientation;
      if (o.w == q.w && o.x == q.x && o.y == q.y && o.z == q.z) return t;
    }
    cache.push_back(make_template(shape, q, s));
    return cache.back();
  };

  const Vec3& base = record.container.pose.t;
  for (const auto& p : record.placements) {
    Quat q{p[0], p[1], p[2], p[3]};
    const ObjectTemplate& tpl = tpl_for(q);
    // Invert the placement equation t = s*(cx,cy,cz) - template_origin + base.
    Vec3 cell{(p[4] - base.x + tpl.vox.origin.x) / s, (p[5] - base.y + tpl.vox.origin.y) / s,
              (p[6] - base.z + tpl.vox.origin.z) / s};
    int cx = int(std::lround(cell.x)), cy = int(std::lround(cell.y)),
        cz = int(std::lround(cell.z));
    if (cx < 0 || cy < 0 || cz < 0 || cx + tpl.vox.nx > occ.nx || cy + tpl.vox.ny > occ.ny ||
        cz + tpl.vox.nz > occ.nz)
      fail(errc::config, "scene record placement lies outside the container");
    for (int hz = 0; hz < tpl.vox.nz; ++hz)
      for (int hy = 0; hy < tpl.vox.ny; ++hy)
        for (int hx = 0; hx < tpl.vox.nx; ++hx)
          if (tpl.vox.get(hx, hy, hz)) occ.set(cx + hx, cy + hy, cz + hz, true);
  }
  return realize_scene(fill);
}

}  // namespace stackcount
