#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "stackcount/scenegen.h"

namespace stackcount {
namespace {

constexpr double kPi = 3.14159265358979323846;

TriMesh make_icosphere(double radius, int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) * 0.5;
  TriMesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0},   {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},
             {5, 11, 4}, {11, 10, 2}, {10, 7, 6},  {7, 1, 8},  {3, 9, 4},   {3, 4, 2},
             {3, 2, 6},  {3, 6, 8},  {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10},
             {8, 6, 7},  {9, 8, 1}};
  for (auto& v : m.vertices) v = v * (radius / norm(v));

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Vec3 p = (m.vertices[a] + m.vertices[b]) * 0.5;
      p = p * (radius / norm(p));
      m.vertices.push_back(p);
      int idx = int(m.vertices.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(m.faces.size() * 4);
    for (const auto& f : m.faces) {
      int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.faces = std::move(next);
  }
  return m;
}

// Surface of revolution about +z from an (r, z) profile running pole to pole:
// first and last entries must have r == 0, interior entries r > 0.
TriMesh lathe_open(const std::vector<std::pair<double, double>>& profile, int seg) {
  TriMesh m;
  int rings = int(profile.size()) - 2;
  m.vertices.push_back({0, 0, profile.front().second});
  for (int i = 0; i < rings; ++i) {
    auto [r, z] = profile[size_t(i) + 1];
    for (int k = 0; k < seg; ++k) {
      double a = 2.0 * kPi * k / seg;
      m.vertices.push_back({r * std::cos(a), r * std::sin(a), z});
    }
  }
  m.vertices.push_back({0, 0, profile.back().second});
  int top = int(m.vertices.size()) - 1;
  auto ring = [&](int i, int k) { return 1 + i * seg + (k % seg); };

  for (int k = 0; k < seg; ++k) m.faces.push_back({0, ring(0, k + 1), ring(0, k)});
  for (int i = 0; i + 1 < rings; ++i)
    for (int k = 0; k < seg; ++k) {
      int a = ring(i, k), b = ring(i, k + 1), c = ring(i + 1, k + 1), d = ring(i + 1, k);
      m.faces.push_back({a, b, c});
      m.faces.push_back({a, c, d});
    }
  for (int k = 0; k < seg; ++k) m.faces.push_back({top, ring(rings - 1, k), ring(rings - 1, k + 1)});
  return m;
}

// Closed (r, z) loop revolved about +z; the loop must be counterclockwise in
// the half-plane (outward at the largest radius) with every r > 0.
TriMesh lathe_closed(const std::vector<std::pair<double, double>>& loop, int seg) {
  TriMesh m;
  int rings = int(loop.size());
  for (int i = 0; i < rings; ++i)
    for (int k = 0; k < seg; ++k) {
      double a = 2.0 * kPi * k / seg;
      m.vertices.push_back({loop[i].first * std::cos(a), loop[i].first * std::sin(a),
                            loop[i].second});
    }
  auto ring = [&](int i, int k) { return (i % rings) * seg + (k % seg); };
  for (int i = 0; i < rings; ++i)
    for (int k = 0; k < seg; ++k) {
      int a = ring(i, k), b = ring(i, k + 1), c = ring(i + 1, k + 1), d = ring(i + 1, k);
      m.faces.push_back({a, b, c});
      m.faces.push_back({a, c, d});
    }
  return m;
}

double poly_cross(const Vec3& o, const Vec3& a, const Vec3& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool point_in_tri(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  double d1 = poly_cross(a, b, p), d2 = poly_cross(b, c, p), d3 = poly_cross(c, a, p);
  return d1 >= 0 && d2 >= 0 && d3 >= 0;
}

// Ear-clipping triangulation of a simple CCW polygon (indices into pts).
std::vector<std::array<int, 3>> triangulate(const std::vector<Vec3>& pts) {
  std::vector<int> idx(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) idx[i] = int(i);
  std::vector<std::array<int, 3>> tris;
  int guard = int(pts.size()) * int(pts.size()) + 16;
  while (idx.size() > 3 && guard-- > 0) {
    bool clipped = false;
    for (size_t i = 0; i < idx.size(); ++i) {
      int ia = idx[(i + idx.size() - 1) % idx.size()], ib = idx[i],
          ic = idx[(i + 1) % idx.size()];
      if (poly_cross(pts[ia], pts[ib], pts[ic]) <= 1e-12) continue;  // reflex or flat
      bool ear = true;
      for (int j : idx) {
        if (j == ia || j == ib || j == ic) continue;
        if (point_in_tri(pts[j], pts[ia], pts[ib], pts[ic])) {
          ear = false;
          break;
        }
      }
      if (!ear) continue;
      tris.push_back({ia, ib, ic});
      idx.erase(idx.begin() + long(i));
      clipped = true;
      break;
    }
    if (!clipped) fail(errc::numeric, "polygon triangulation failed");
  }
  if (idx.size() == 3) tris.push_back({idx[0], idx[1], idx[2]});
  return tris;
}

// Prism over a simple CCW polygon in the xy plane, z in [-h/2, h/2].
TriMesh extrude(const std::vector<Vec3>& poly, double h) {
  int n = int(poly.size());
  TriMesh m;
  for (const auto& p : poly) m.vertices.push_back({p.x, p.y, -h * 0.5});
  for (const auto& p : poly) m.vertices.push_back({p.x, p.y, h * 0.5});
  auto tris = triangulate(poly);
  for (const auto& t : tris) m.faces.push_back({t[0], t[2], t[1]});              // bottom
  for (const auto& t : tris) m.faces.push_back({t[0] + n, t[1] + n, t[2] + n});  // top
  for (int i = 0; i < n; ++i) {
    int j = (i + 1) % n;
    m.faces.push_back({i, j, j + n});
    m.faces.push_back({i, j + n, i + n});
  }
  return m;
}

// Recenter on the origin and scale the longest bounding-box side to kShapeSide.
void normalize_mesh(TriMesh& m) {
  AABB b = m.bounds();
  Vec3 c = b.center();
  Vec3 e = b.extent();
  double maxext = std::max({e.x, e.y, e.z});
  if (maxext <= 0) fail(errc::generation, "degenerate shape extent");
  double s = kShapeSide / maxext;
  for (auto& v : m.vertices) v = (v - c) * s;
}

TriMesh build_family(ShapeFamily family, Rng& rng) {
  switch (family) {
    case ShapeFamily::sphere:
      // No shape parameters: the family is a geodesic ball (volume within a
      // fraction of a percent of the exact ball).
      return make_icosphere(1.0, 3);
    case ShapeFamily::box: {
      double a = rng.uniform(0.45, 1.0), b = rng.uniform(0.45, 1.0);
      return box_mesh(kShapeSide * a, kShapeSide * b, kShapeSide);
    }
    case ShapeFamily::capsule: {
      double r = rng.uniform(0.25, 0.45);  // of total height 1
      int rings = 8, seg = 24;
      std::vector<std::pair<double, double>> prof;
      prof.emplace_back(0.0, -0.5);
      for (int j = 1; j <= rings; ++j) {
        double a = -kPi * 0.5 + kPi * 0.5 * j / rings;
        prof.emplace_back(r * std::cos(a), -0.5 + r + r * std::sin(a));
      }
      for (int j = 1; j <= rings; ++j) {
        double a = kPi * 0.5 * j / rings;
        prof.emplace_back(r * std::cos(a), 0.5 - r + r * std::sin(a));
      }
      prof.emplace_back(0.0, 0.5);
      return lathe_open(prof, seg);
    }
    case ShapeFamily::torus: {
      double rho = rng.uniform(0.25, 0.55);  // minor over major radius
      int k = 16, seg = 32;
      std::vector<std::pair<double, double>> loop;
      for (int j = 0; j < k; ++j) {
        double a = 2.0 * kPi * j / k;
        loop.emplace_back(1.0 + rho * std::cos(a), rho * std::sin(a));
      }
      return lathe_closed(loop, seg);
    }
    case ShapeFamily::ell: {
      double w1 = rng.uniform(0.35, 0.6), w2 = rng.uniform(0.35, 0.6);
      double h = rng.uniform(0.3, 0.7);
      std::vector<Vec3> poly = {{0, 0, 0},  {1, 0, 0},  {1, w1, 0},
                                {w2, w1, 0}, {w2, 1, 0}, {0, 1, 0}};
      return extrude(poly, h);
    }
    case ShapeFamily::cross: {
      double c = 0.5, a = rng.uniform(0.15, 0.3);
      double h = rng.uniform(0.25, 0.5);
      std::vector<Vec3> poly = {{-a, -c, 0}, {a, -c, 0},  {a, -a, 0},  {c, -a, 0},
                                {c, a, 0},   {a, a, 0},   {a, c, 0},   {-a, c, 0},
                                {-a, a, 0},  {-c, a, 0},  {-c, -a, 0}, {-a, -a, 0}};
      return extrude(poly, h);
    }
    case ShapeFamily::tube: {
      double ri = rng.uniform(0.4, 0.7), h = rng.uniform(0.4, 1.0);
      std::vector<std::pair<double, double>> loop = {
          {1.0, -h * 0.5}, {1.0, h * 0.5}, {ri, h * 0.5}, {ri, -h * 0.5}};
      return lathe_closed(loop, 32);
    }
    case ShapeFamily::composite: {
      double sw = rng.uniform(0.3, 0.5), sd = rng.uniform(0.4, 0.7);
      double h = rng.uniform(0.35, 0.7);
      double x0 = (1.0 - sw) * 0.5, x1 = (1.0 + sw) * 0.5;
      std::vector<Vec3> poly = {{0, 0, 0},      {1, 0, 0},      {1, 1, 0}, {x1, 1, 0},
                                {x1, 1 - sd, 0}, {x0, 1 - sd, 0}, {x0, 1, 0}, {0, 1, 0}};
      return extrude(poly, h);
    }
  }
  fail(errc::config, "unknown shape family");
}

}  // namespace

TriMesh box_mesh(double sx, double sy, double sz) {
  double hx = sx * 0.5, hy = sy * 0.5, hz = sz * 0.5;
  TriMesh m;
  m.vertices = {{-hx, -hy, -hz}, {hx, -hy, -hz}, {hx, hy, -hz}, {-hx, hy, -hz},
                {-hx, -hy, hz},  {hx, -hy, hz},  {hx, hy, hz},  {-hx, hy, hz}};
  m.faces = {{0, 2, 1}, {0, 3, 2}, {4, 5, 6}, {4, 6, 7}, {0, 1, 5}, {0, 5, 4},
             {1, 2, 6}, {1, 6, 5}, {2, 3, 7}, {2, 7, 6}, {3, 0, 4}, {3, 4, 7}};
  return m;
}

const char* to_string(ShapeFamily f) {
  switch (f) {
    case ShapeFamily::sphere: return "sphere";
    case ShapeFamily::box: return "box";
    case ShapeFamily::capsule: return "capsule";
    case ShapeFamily::torus: return "torus";
    case ShapeFamily::ell: return "ell";
    case ShapeFamily::cross: return "cross";
    case ShapeFamily::tube: return "tube";
    case ShapeFamily::composite: return "composite";
  }
  return "?";
}

ShapeFamily shape_family_from_string(const std::string& s) {
  for (ShapeFamily f : kAllShapeFamilies)
    if (s == to_string(f)) return f;
  fail(errc::config, "unknown shape family: " + s);
}

std::string shape_id(ShapeFamily family, uint64_t seed) {
  return std::string(to_string(family)) + ":" + std::to_string(seed);
}

TriMesh generate_shape(ShapeFamily family, uint64_t seed) {
  Rng rng(Rng::stream(seed, uint64_t(family) + 1));
  for (int attempt = 0; attempt < 8; ++attempt) {
    TriMesh m = build_family(family, rng);
    normalize_mesh(m);
    AABB b = m.bounds();
    Vec3 e = b.extent();
    bool fits = std::max({e.x, e.y, e.z}) <= kShapeSide * (1.0 + 1e-9);
    if (fits && watertight_report(m).ok() && mesh_volume(m) > 0) return m;
  }
  fail(errc::generation, std::string("shape generation failed: ") + to_string(family));
}

const std::array<Quat, 24>& cube_orientations() {
  static const std::array<Quat, 24> table = [] {
    std::array<Quat, 24> out;
    int n = 0;
    for (int axis0 = 0; axis0 < 3; ++axis0)
      for (int sign0 = 1; sign0 >= -1; sign0 -= 2)
        for (int axis1 = 0; axis1 < 3; ++axis1) {
          if (axis1 == axis0) continue;
          for (int sign1 = 1; sign1 >= -1; sign1 -= 2) {
            Vec3 c0{0, 0, 0}, c1{0, 0, 0};
            c0[axis0] = sign0;
            c1[axis1] = sign1;
            Vec3 c2 = cross(c0, c1);
            Mat3 r;
            for (int row = 0; row < 3; ++row) {
              r(row, 0) = c0[row];
              r(row, 1) = c1[row];
              r(row, 2) = c2[row];
            }
            out[size_t(n++)] = quat_from_mat(r);
          }
        }
    return out;
  }();
  return table;
}

}  // namespace stackcount
