#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "stackcount/render.h"

using namespace stackcount;

namespace {

Camera simple_nadir(const Vec3& over, double height, int size = 65, double f = 80.0) {
  Camera c;
  c.fx = c.fy = f;
  c.cx = c.cy = size / 2.0;
  c.width = c.height = size;
  c.pose = look_at({over.x, over.y, over.z + height}, over);
  return c;
}

// Random blob used by the consistency tests: ~10% fill plus a solid block.
VoxelGrid blob_grid(uint64_t seed) {
  VoxelGrid g(24, 24, 24, 0.1, {-1.2, -1.2, -1.2});
  Rng rng(seed);
  for (int z = 0; z < 24; ++z)
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 24; ++x)
        if (rng.uniform() < 0.1) g.set(x, y, z, true);
  for (int z = 6; z < 12; ++z)
    for (int y = 8; y < 16; ++y)
      for (int x = 8; x < 16; ++x) g.set(x, y, z, true);
  return g;
}

LabeledScene box_scene(bool with_objects) {
  LabeledScene s;
  s.cells = ByteGrid(40, 40, 20, 0.05, {0, 0, 0});
  s.ground_z = 0.0;
  // Open-top box: floor layer plus a one-cell wall ring, footprint [10,30).
  for (int y = 10; y < 30; ++y)
    for (int x = 10; x < 30; ++x) s.cells.put(x, y, 0, kLabelContainer);
  for (int z = 0; z < 12; ++z)
    for (int y = 10; y < 30; ++y)
      for (int x = 10; x < 30; ++x)
        if (x == 10 || x == 29 || y == 10 || y == 29) s.cells.put(x, y, z, kLabelContainer);
  if (with_objects)
    for (int z = 1; z < 6; ++z)
      for (int y = 11; y < 29; ++y)
        for (int x = 11; x < 29; ++x) s.cells.put(x, y, z, kLabelObject);
  return s;
}

}  // namespace

TEST_CASE("view ring: nadir first, all aimed at center, deterministic") {
  ViewRingOptions opt;
  opt.scene_radius = 1.0;
  Vec3 center{0.3, -0.2, 0.5};
  auto cams = make_view_ring(12, 4.0, center, 20, 70, 42, opt);
  REQUIRE(cams.size() == 12);

  // Camera 0 looks straight down: its forward axis is world -z.
  Vec3 fwd = cams[0].pose.R.row(2);
  CHECK(fwd.x == 0.0);
  CHECK(fwd.y == 0.0);
  CHECK(fwd.z == -1.0);
  CHECK(norm(cams[0].position() - (center + Vec3{0, 0, 4.0})) < 1e-12);

  for (const Camera& c : cams) {
    double u, v, z;
    REQUIRE(c.project(center, &u, &v, &z));
    CHECK(std::abs(u - c.cx) < 1e-6);
    CHECK(std::abs(v - c.cy) < 1e-6);
    CHECK(z == doctest::Approx(4.0).epsilon(1e-12));
  }

  auto again = make_view_ring(12, 4.0, center, 20, 70, 42, opt);
  for (size_t i = 0; i < cams.size(); ++i) {
    CHECK(std::memcmp(cams[i].pose.R.m.data(), again[i].pose.R.m.data(), 9 * 8) == 0);
    CHECK(cams[i].pose.t.x == again[i].pose.t.x);
  }
  auto other = make_view_ring(12, 4.0, center, 20, 70, 43, opt);
  bool any_diff = false;
  for (size_t i = 1; i < cams.size(); ++i)
    any_diff = any_diff || norm(cams[i].position() - other[i].position()) > 1e-12;
  CHECK(any_diff);

  CHECK_THROWS_AS(make_view_ring(0, 4.0, center, 20, 70, 1), error);
  CHECK_THROWS_AS(make_view_ring(5, 0.5, center, 20, 70, 1, opt), error);  // inside scene
  CHECK_THROWS_AS(make_view_ring(5, 4.0, center, 80, 20, 1), error);
}

TEST_CASE("render_depth: nadir over a flat slab gives constant exact depth") {
  VoxelGrid g(64, 64, 4, 0.05, {0, 0, 0});
  g.fill(true);
  Camera c = simple_nadir({1.6, 1.6, 0}, 2.2);
  DepthMap d = render_depth(g, c);
  for (float x : d.depths) CHECK(std::abs(double(x) - 2.0) <= 1e-6);
}

TEST_CASE("render_depth: single voxel near-face depth, empty grid, camera inside") {
  VoxelGrid g(1, 1, 1, 0.1, {-0.05, -0.05, -0.05});
  g.set(0, 0, 0, true);
  Camera down = simple_nadir({0, 0, 0}, 1.0);
  DepthMap d = render_depth(g, down);
  CHECK(d.at(32, 32) == doctest::Approx(0.95).epsilon(1e-6));

  Camera side;
  side.fx = side.fy = 80;
  side.cx = side.cy = 32.5;
  side.width = side.height = 65;
  side.pose = look_at({1, 0, 0}, {0, 0, 0});
  CHECK(render_depth(g, side).at(32, 32) == doctest::Approx(0.95).epsilon(1e-6));

  VoxelGrid empty(8, 8, 8, 0.1, {0, 0, 0});
  DepthMap de = render_depth(empty, down);
  for (float x : de.depths) CHECK(x == kNoHit);

  VoxelGrid slab(8, 8, 8, 0.5, {-2, -2, -2});
  slab.fill(true);
  Camera inside = simple_nadir({0, 0, -1.0}, 0.5);  // eye at z = -0.5, inside the slab
  CHECK_THROWS_AS(render_depth(slab, inside), error);
}

TEST_CASE("render_depth: doubling resolution reproduces coarse rays bit-exactly") {
  VoxelGrid g = blob_grid(7);
  ViewRingOptions opt;
  opt.width = opt.height = 64;
  opt.fov_deg = 40;
  Camera lo = make_view_ring(4, 6.0, {0, 0, 0}, 20, 70, 99, opt)[2];
  Camera hi = lo;
  hi.width = lo.width * 2;
  hi.height = lo.height * 2;
  hi.fx = lo.fx * 2;
  hi.fy = lo.fy * 2;
  hi.cx = 2 * lo.cx - 0.5;
  hi.cy = 2 * lo.cy - 0.5;

  DepthMap dl = render_depth(g, lo), dh = render_depth(g, hi);
  for (int v = 0; v < lo.height; ++v)
    for (int u = 0; u < lo.width; ++u) {
      float a = dl.at(u, v), b = dh.at(2 * u, 2 * v);
      CHECK(std::memcmp(&a, &b, 4) == 0);
    }
}

TEST_CASE("render_view: masks are disjoint and cover exactly the non-ground hits") {
  LabeledScene scene = box_scene(true);
  ViewRingOptions opt;
  opt.width = opt.height = 96;
  auto cams = make_view_ring(6, 4.0, {1.0, 1.0, 0.3}, 15, 70, 5, opt);
  for (const Camera& c : cams) {
    ViewRender r = render_view(scene, c);
    for (int v = 0; v < 96; ++v)
      for (int u = 0; u < 96; ++u) {
        bool o = r.object_mask.get(u, v), k = r.container_mask.get(u, v);
        CHECK_FALSE((o && k));
        if (o || k) CHECK(r.depth.at(u, v) != kNoHit);
      }
  }
}

TEST_CASE("render_view: empty box shows container only; full box footprint area") {
  Camera c = simple_nadir({1.0, 1.0, 0}, 3.0, 97);

  LabeledScene empty_box = box_scene(false);
  ViewRender re = render_view(empty_box, c);
  CHECK(re.object_mask.count() == 0);
  CHECK(re.container_mask.count() > 0);

  LabeledScene full = box_scene(true);
  ViewRender rf = render_view(full, c);
  // Cavity footprint is 0.9 x 0.9 at depth 3.0 - 0.3; pinhole area oracle.
  double half = 0.45 * 80.0 / 2.7;
  double expect = (2 * half) * (2 * half);
  CHECK(double(rf.object_mask.count()) == doctest::Approx(expect).epsilon(0.1));
  // Nadir must beat oblique views over an open box.
  ViewRingOptions opt;
  opt.width = opt.height = 97;
  auto ring = make_view_ring(8, 3.0, {1.0, 1.0, 0.3}, 15, 65, 11, opt);
  std::vector<Mask> masks;
  for (const Camera& cam : ring) masks.push_back(render_masks(full, cam).first);
  CHECK(select_key_view(masks) == 0);
}

TEST_CASE("select_key_view: argmax, ties low, empty errors, permutation-equivariant") {
  auto mask_with = [](int k) {
    Mask m(10, 10);
    for (int i = 0; i < k; ++i) m.bits[size_t(i)] = 1;
    return m;
  };
  std::vector<Mask> ms;
  ms.push_back(mask_with(10));
  ms.push_back(mask_with(50));
  ms.push_back(mask_with(30));
  CHECK(select_key_view(ms) == 1);
  std::vector<Mask> tie;
  tie.push_back(mask_with(7));
  tie.push_back(mask_with(7));
  CHECK(select_key_view(tie) == 0);
  std::vector<Mask> none;
  none.push_back(mask_with(0));
  none.push_back(mask_with(0));
  CHECK_THROWS_AS(select_key_view(none), error);

  std::vector<Mask> perm;
  perm.push_back(mask_with(30));
  perm.push_back(mask_with(10));
  perm.push_back(mask_with(50));
  CHECK(select_key_view(perm) == 2);
}

TEST_CASE("crop_to_mask: offset square crop is the exact sub-rectangle") {
  DepthMap d(20, 16);
  Rng rng(3);
  for (float& x : d.depths) x = float(rng.uniform(1, 5));
  Mask m(20, 16);
  for (int v = 6; v < 14; ++v)
    for (int u = 4; u < 12; ++u) m.set(u, v, true);
  CropResult r = crop_to_mask(d, m, 8);
  for (int oy = 0; oy < 8; ++oy)
    for (int ox = 0; ox < 8; ++ox) {
      CHECK(r.depth.at(ox, oy) == d.at(4 + ox, 6 + oy));
      CHECK(r.valid.get(ox, oy));
    }
}

TEST_CASE("crop_to_mask: fill value, single pixel, errors") {
  DepthMap d(12, 12);
  for (int v = 0; v < 12; ++v)
    for (int u = 0; u < 12; ++u) d.at(u, v) = float(1 + u + 12 * v);
  Mask L(12, 12);
  for (int v = 2; v < 10; ++v)
    for (int u = 2; u < 10; ++u)
      if (u < 6 || v >= 6) L.set(u, v, true);  // L-shape inside an 8x8 box
  CropResult r = crop_to_mask(d, L, 8);
  float fill = 0;
  for (int v = 2; v < 10; ++v)
    for (int u = 2; u < 10; ++u)
      if (L.get(u, v)) fill = std::max(fill, d.at(u, v));
  for (int oy = 0; oy < 8; ++oy)
    for (int ox = 0; ox < 8; ++ox)
      if (!r.valid.get(ox, oy)) CHECK(r.depth.at(ox, oy) == fill);

  Mask one(12, 12);
  one.set(5, 7, true);
  CropResult r1 = crop_to_mask(d, one, 6);
  for (float x : r1.depth.depths) CHECK(x == d.at(5, 7));
  for (uint8_t b : r1.valid.bits) CHECK(b == 1);

  Mask empty(12, 12);
  CHECK_THROWS_AS(crop_to_mask(d, empty, 8), error);
  DepthMap dinf(12, 12);  // all invalid
  CHECK_THROWS_AS(crop_to_mask(dinf, one, 8), error);
}

TEST_CASE("rendered depth never exceeds a voxel's own depth by more than one diagonal") {
  VoxelGrid g = blob_grid(21);
  double diag = g.voxel * std::sqrt(3.0);
  ViewRingOptions opt;
  opt.width = opt.height = 256;
  opt.fov_deg = 40;
  auto cams = make_view_ring(5, 6.0, {0, 0, 0}, 20, 70, 17, opt);
  for (const Camera& c : cams) {
    DepthMap d = render_depth(g, c);
    for (int z = 0; z < g.nz; ++z)
      for (int y = 0; y < g.ny; ++y)
        for (int x = 0; x < g.nx; ++x) {
          if (!g.get(x, y, z)) continue;
          double u, v, qz;
          if (!c.project(g.center_of(x, y, z), &u, &v, &qz)) continue;
          int iu = int(std::floor(u)), iv = int(std::floor(v));
          if (iu < 0 || iv < 0 || iu >= d.width || iv >= d.height) continue;
          CHECK(double(d.at(iu, iv)) <= qz + diag + 1e-6);
        }
  }
}

TEST_CASE("pfm, pgm and camera json round-trips") {
  std::string dir = (std::filesystem::temp_directory_path() / "sc_render_io").string();

  DepthMap d(17, 9);
  Rng rng(9);
  for (float& x : d.depths) x = rng.uniform() < 0.2 ? kNoHit : float(rng.uniform(0.1, 9));
  write_pfm(dir + "/d.pfm", d);
  DepthMap back = read_pfm(dir + "/d.pfm");
  REQUIRE(back.width == 17);
  REQUIRE(back.height == 9);
  CHECK(std::memcmp(back.depths.data(), d.depths.data(), d.depths.size() * 4) == 0);

  Mask m(23, 11);
  for (auto& b : m.bits) b = rng.uniform() < 0.5 ? 1 : 0;
  write_pgm(dir + "/m.pgm", m);
  Mask mb = read_pgm(dir + "/m.pgm");
  REQUIRE(mb.width == 23);
  CHECK(mb.bits == m.bits);

  auto cams = make_view_ring(7, 4.0, {0.5, 0.5, 0.2}, 20, 70, 123);
  write_cameras_json(dir + "/cams.json", cams);
  auto cb = read_cameras_json(dir + "/cams.json");
  REQUIRE(cb.size() == cams.size());
  for (size_t i = 0; i < cams.size(); ++i) {
    CHECK(cb[i].fx == cams[i].fx);
    CHECK(cb[i].pose.R.m == cams[i].pose.R.m);
    CHECK(cb[i].pose.t.x == cams[i].pose.t.x);
    CHECK(cb[i].width == cams[i].width);
  }

  write_file(dir + "/bad.pfm", "PF\n2 2\n-1.0\nxxxx");
  CHECK_THROWS_AS(read_pfm(dir + "/bad.pfm"), error);
  write_file(dir + "/bad.pgm", "P5\n4 4\n255\nzz");
  CHECK_THROWS_AS(read_pgm(dir + "/bad.pgm"), error);
  CHECK_THROWS_AS(read_pfm(dir + "/absent.pfm"), error);
}
