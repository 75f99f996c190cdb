#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "stackcount/geometry.h"

namespace stackcount {

namespace {

// Union-find over face indices for the connectivity check.
struct DSU {
  std::vector<int> parent;
  explicit DSU(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

double signed_volume_about(const TriMesh& mesh, const Vec3& ref) {
  double vol6 = 0;
  for (const auto& f : mesh.faces) {
    Vec3 a = mesh.vertices[size_t(f[0])] - ref;
    Vec3 b = mesh.vertices[size_t(f[1])] - ref;
    Vec3 c = mesh.vertices[size_t(f[2])] - ref;
    vol6 += dot(a, cross(b, c));
  }
  return vol6 / 6.0;
}

}  // namespace

WatertightReport watertight_report(const TriMesh& mesh) {
  WatertightReport rep;
  const int nv = int(mesh.vertices.size());
  rep.indices_valid = !mesh.faces.empty();
  for (const auto& f : mesh.faces) {
    for (int i = 0; i < 3; ++i)
      if (f[i] < 0 || f[i] >= nv) rep.indices_valid = false;
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) rep.indices_valid = false;
  }
  if (!rep.indices_valid) return rep;

  // Directed edge map: a closed orientable surface uses each directed edge
  // exactly once and its reverse exactly once.
  std::map<std::pair<int, int>, int> directed;  // edge -> face index
  bool dup = false;
  for (int fi = 0; fi < int(mesh.faces.size()); ++fi) {
    const auto& f = mesh.faces[size_t(fi)];
    for (int e = 0; e < 3; ++e) {
      auto key = std::make_pair(f[e], f[(e + 1) % 3]);
      if (!directed.emplace(key, fi).second) dup = true;
    }
  }
  rep.edges_paired = !dup;
  if (rep.edges_paired) {
    for (const auto& [edge, fi] : directed) {
      (void)fi;
      if (!directed.count({edge.second, edge.first})) {
        rep.edges_paired = false;
        break;
      }
    }
  }

  DSU dsu(int(mesh.faces.size()));
  if (rep.edges_paired) {
    for (const auto& [edge, fi] : directed) {
      auto rev = directed.find({edge.second, edge.first});
      if (rev != directed.end()) dsu.unite(fi, rev->second);
    }
    int root = dsu.find(0);
    rep.single_component = true;
    for (int fi = 1; fi < int(mesh.faces.size()); ++fi)
      if (dsu.find(fi) != root) {
        rep.single_component = false;
        break;
      }
  }

  if (rep.edges_paired && rep.single_component) {
    AABB b;
    for (const auto& v : mesh.vertices) b.expand(v);
    rep.positive_volume = signed_volume_about(mesh, b.center()) > 0;
  }
  return rep;
}

double mesh_volume(const TriMesh& mesh) {
  WatertightReport rep = watertight_report(mesh);
  if (!rep.edges_paired || !rep.indices_valid)
    fail(errc::numeric, "mesh_volume requires a watertight mesh");
  AABB b;
  for (const auto& v : mesh.vertices) b.expand(v);
  // Summing about the centroid keeps the tetrahedra well conditioned far from
  // the origin; the result is translation invariant analytically.
  return signed_volume_about(mesh, b.center());
}

TriMesh parse_obj(const std::string& text, const std::string& origin) {
  TriMesh mesh;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x >> v.y >> v.z))
        fail(errc::config, origin + ":" + std::to_string(lineno) + ": malformed vertex line");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        // Accept "3", "3/1", "3//2", "3/1/2"; only the vertex index is used.
        size_t slash = tok.find('/');
        std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
        int v = 0;
        try {
          v = std::stoi(head);
        } catch (...) {
          fail(errc::config, origin + ":" + std::to_string(lineno) + ": bad face index '" + tok + "'");
        }
        if (v <= 0 || v > int(mesh.vertices.size()))
          fail(errc::config,
               origin + ":" + std::to_string(lineno) + ": face index out of range");
        idx.push_back(v - 1);
      }
      if (idx.size() != 3)
        fail(errc::config,
             origin + ":" + std::to_string(lineno) + ": only triangular faces are supported");
      mesh.faces.push_back({idx[0], idx[1], idx[2]});
    }
    // Other line types (comments, normals, materials) are ignored.
  }
  return mesh;
}

TriMesh read_obj(const std::string& path) { return parse_obj(read_file(path), path); }

std::string write_obj_text(const TriMesh& mesh) {
  std::string out;
  out.reserve(mesh.vertices.size() * 48 + mesh.faces.size() * 24);
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.9f %.9f %.9f\n", v.x, v.y, v.z);
    out += buf;
  }
  for (const auto& f : mesh.faces) {
    std::snprintf(buf, sizeof(buf), "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
    out += buf;
  }
  return out;
}

void write_obj(const std::string& path, const TriMesh& mesh) {
  write_file(path, write_obj_text(mesh));
}

}  // namespace stackcount
