// Incremental quickhull. Deterministic: extreme points and conflict apexes
// break ties toward the lowest index, faces are processed in creation order.

#include <algorithm>
#include <map>
#include <queue>
#include <set>

#include "stackcount/geometry.h"

namespace stackcount {

namespace {

struct HullFace {
  std::array<int, 3> v;
  Vec3 n;      // unit outward normal
  double d;    // plane offset: dot(n, x) = d
  bool alive = true;
  std::vector<int> conflicts;
};

double face_dist(const HullFace& f, const Vec3& p) { return dot(f.n, p) - f.d; }

HullFace make_face(const std::vector<Vec3>& pts, int a, int b, int c) {
  HullFace f;
  f.v = {a, b, c};
  Vec3 n = cross(pts[size_t(b)] - pts[size_t(a)], pts[size_t(c)] - pts[size_t(a)]);
  double len = norm(n);
  f.n = len > 0 ? n / len : Vec3{0, 0, 0};
  f.d = dot(f.n, pts[size_t(a)]);
  return f;
}

}  // namespace

TriMesh convex_hull(const std::vector<Vec3>& points) {
  const int n = int(points.size());
  if (n < 4) fail(errc::numeric, "convex_hull: need at least 4 points");
  AABB box;
  for (const auto& p : points) box.expand(p);
  const double eps = 1e-9 * std::max(box.diagonal(), 1e-30);

  // Initial simplex from axis extremes, then the most distant point from the
  // line and from the plane. Ascending scans with strict comparisons keep the
  // lowest index on ties.
  int ext[6] = {0, 0, 0, 0, 0, 0};
  for (int i = 1; i < n; ++i) {
    const Vec3& p = points[size_t(i)];
    for (int a = 0; a < 3; ++a) {
      if (p[a] < points[size_t(ext[2 * a])][a]) ext[2 * a] = i;
      if (p[a] > points[size_t(ext[2 * a + 1])][a]) ext[2 * a + 1] = i;
    }
  }
  int p0 = -1, p1 = -1;
  double best = -1;
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j) {
      double d2 = norm2(points[size_t(ext[i])] - points[size_t(ext[j])]);
      if (d2 > best) {
        best = d2;
        p0 = std::min(ext[i], ext[j]);
        p1 = std::max(ext[i], ext[j]);
      }
    }
  if (p0 < 0 || std::sqrt(std::max(best, 0.0)) <= eps)
    fail(errc::numeric, "convex_hull: degenerate input (all points coincide)");

  Vec3 dir = points[size_t(p1)] - points[size_t(p0)];
  int p2 = -1;
  best = eps;
  for (int i = 0; i < n; ++i) {
    Vec3 rel = points[size_t(i)] - points[size_t(p0)];
    double dist = norm(cross(rel, dir)) / norm(dir);
    if (dist > best) {
      best = dist;
      p2 = i;
    }
  }
  if (p2 < 0) fail(errc::numeric, "convex_hull: degenerate input (collinear points)");

  Vec3 pn = cross(points[size_t(p1)] - points[size_t(p0)], points[size_t(p2)] - points[size_t(p0)]);
  pn = normalized(pn);
  double pd = dot(pn, points[size_t(p0)]);
  int p3 = -1;
  best = eps;
  for (int i = 0; i < n; ++i) {
    double dist = std::abs(dot(pn, points[size_t(i)]) - pd);
    if (dist > best) {
      best = dist;
      p3 = i;
    }
  }
  if (p3 < 0) fail(errc::numeric, "convex_hull: degenerate input (coplanar points)");
  if (dot(pn, points[size_t(p3)]) - pd > 0) std::swap(p1, p2);  // make p3 below (p0,p1,p2)

  std::vector<HullFace> faces;
  std::map<std::pair<int, int>, int> edge_owner;  // directed edge -> face id
  auto add_face = [&](int a, int b, int c) -> int {
    HullFace f = make_face(points, a, b, c);
    int id = int(faces.size());
    faces.push_back(std::move(f));
    edge_owner[{a, b}] = id;
    edge_owner[{b, c}] = id;
    edge_owner[{c, a}] = id;
    return id;
  };
  auto kill_face = [&](int id) {
    HullFace& f = faces[size_t(id)];
    f.alive = false;
    edge_owner.erase({f.v[0], f.v[1]});
    edge_owner.erase({f.v[1], f.v[2]});
    edge_owner.erase({f.v[2], f.v[0]});
  };

  add_face(p0, p1, p2);
  add_face(p0, p2, p3);
  add_face(p2, p1, p3);
  add_face(p1, p0, p3);

  // Assign every point to the first face it lies furthest outside of.
  for (int i = 0; i < n; ++i) {
    double bd = eps;
    int bf = -1;
    for (int fi = 0; fi < 4; ++fi) {
      double d = face_dist(faces[size_t(fi)], points[size_t(i)]);
      if (d > bd) {
        bd = d;
        bf = fi;
      }
    }
    if (bf >= 0) faces[size_t(bf)].conflicts.push_back(i);
  }

  std::priority_queue<int, std::vector<int>, std::greater<int>> pending;
  for (int fi = 0; fi < 4; ++fi)
    if (!faces[size_t(fi)].conflicts.empty()) pending.push(fi);

  size_t guard = 0;
  const size_t guard_limit = size_t(n) * 64 + 1024;
  while (!pending.empty()) {
    if (++guard > guard_limit) fail(errc::numeric, "convex_hull: did not converge");
    int fid = pending.top();
    pending.pop();
    if (fid >= int(faces.size())) continue;
    HullFace& f = faces[size_t(fid)];
    if (!f.alive || f.conflicts.empty()) continue;

    // Furthest conflict point, lowest index on ties.
    int apex = -1;
    double bd = -1;
    for (int pi : f.conflicts) {
      double d = face_dist(f, points[size_t(pi)]);
      if (d > bd) {
        bd = d;
        apex = pi;
      }
    }
    const Vec3& ap = points[size_t(apex)];

    // Flood fill the faces visible from the apex; horizon edges are the
    // directed edges of visible faces whose neighbor is hidden.
    std::vector<int> visible{fid};
    std::set<int> seen{fid};
    std::vector<std::pair<int, int>> horizon;
    for (size_t qi = 0; qi < visible.size(); ++qi) {
      const HullFace& vf = faces[size_t(visible[qi])];
      for (int e = 0; e < 3; ++e) {
        int a = vf.v[size_t(e)], b = vf.v[size_t((e + 1) % 3)];
        auto it = edge_owner.find({b, a});
        if (it == edge_owner.end()) fail(errc::numeric, "convex_hull: open horizon");
        int nb = it->second;
        if (seen.count(nb)) continue;
        if (face_dist(faces[size_t(nb)], ap) > eps) {
          seen.insert(nb);
          visible.push_back(nb);
        } else {
          horizon.push_back({a, b});
        }
      }
    }

    std::vector<int> orphans;
    for (int vi : visible) {
      HullFace& dead = faces[size_t(vi)];
      orphans.insert(orphans.end(), dead.conflicts.begin(), dead.conflicts.end());
      dead.conflicts.clear();
      kill_face(vi);
    }

    std::vector<int> created;
    for (const auto& [a, b] : horizon) created.push_back(add_face(a, b, apex));

    std::sort(orphans.begin(), orphans.end());
    for (int pi : orphans) {
      if (pi == apex) continue;
      double pbest = eps;
      int pface = -1;
      for (int nf : created) {
        double d = face_dist(faces[size_t(nf)], points[size_t(pi)]);
        if (d > pbest) {
          pbest = d;
          pface = nf;
        }
      }
      if (pface >= 0) faces[size_t(pface)].conflicts.push_back(pi);
    }
    for (int nf : created)
      if (!faces[size_t(nf)].conflicts.empty()) pending.push(nf);
  }

  // Compact used vertices in ascending original order.
  std::vector<int> remap(size_t(n), -1);
  TriMesh hull;
  std::vector<int> used;
  for (const auto& f : faces)
    if (f.alive)
      for (int v : f.v) {
        if (remap[size_t(v)] < 0) {
          remap[size_t(v)] = 0;
          used.push_back(v);
        }
      }
  std::sort(used.begin(), used.end());
  for (int i = 0; i < int(used.size()); ++i) remap[size_t(used[size_t(i)])] = i;
  for (int v : used) hull.vertices.push_back(points[size_t(v)]);
  for (const auto& f : faces)
    if (f.alive) hull.faces.push_back({remap[size_t(f.v[0])], remap[size_t(f.v[1])], remap[size_t(f.v[2])]});

  if (hull.faces.size() < 4) fail(errc::numeric, "convex_hull: degenerate result");
  return hull;
}

}  // namespace stackcount
