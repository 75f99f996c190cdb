#include <map>

#include "stackcount/geometry.h"

namespace stackcount {

double integrated_mean_curvature(const TriMesh& mesh) {
  WatertightReport rep = watertight_report(mesh);
  if (!rep.ok()) fail(errc::numeric, "integrated_mean_curvature requires a watertight mesh");

  // Face normals.
  std::vector<Vec3> normals(mesh.faces.size());
  for (size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    const auto& f = mesh.faces[fi];
    normals[fi] = normalized(cross(mesh.vertices[size_t(f[1])] - mesh.vertices[size_t(f[0])],
                                   mesh.vertices[size_t(f[2])] - mesh.vertices[size_t(f[0])]));
  }

  std::map<std::pair<int, int>, int> owner;  // directed edge -> face
  for (int fi = 0; fi < int(mesh.faces.size()); ++fi) {
    const auto& f = mesh.faces[size_t(fi)];
    for (int e = 0; e < 3; ++e) owner[{f[size_t(e)], f[size_t((e + 1) % 3)]}] = fi;
  }

  // Discrete integrated mean curvature: sum over undirected edges of
  // length * signed exterior dihedral angle / 2 (positive at convex edges).
  double total = 0;
  for (const auto& [edge, f1] : owner) {
    if (edge.first > edge.second) continue;  // visit each undirected edge once
    auto rev = owner.find({edge.second, edge.first});
    if (rev == owner.end()) fail(errc::numeric, "unpaired edge in curvature computation");
    int f2 = rev->second;
    const Vec3& a = mesh.vertices[size_t(edge.first)];
    const Vec3& b = mesh.vertices[size_t(edge.second)];
    Vec3 evec = b - a;
    double elen = norm(evec);
    if (elen <= 0) continue;
    Vec3 ehat = evec / elen;
    const Vec3& n1 = normals[size_t(f1)];
    const Vec3& n2 = normals[size_t(f2)];
    // Angle from n1 to n2 about the edge direction as oriented in f1.
    double s = dot(cross(n1, n2), ehat);
    double c = dot(n1, n2);
    double angle = std::atan2(s, c);
    total += elen * angle * 0.5;
  }
  return total;
}

ComplexityScore complexity_score(const TriMesh& mesh, double kappa0) {
  if (!(kappa0 > 0)) fail(errc::config, "complexity_score: kappa0 must be positive");
  ComplexityScore cs;
  cs.kappa = integrated_mean_curvature(mesh);
  double diag = mesh.bounds().diagonal();
  if (diag <= 0) fail(errc::numeric, "complexity_score: degenerate mesh extent");
  cs.kappa_scaled = cs.kappa / diag;

  double v = mesh_volume(mesh);
  TriMesh hull = convex_hull(mesh.vertices);
  double vh = mesh_volume(hull);
  if (vh <= 0) fail(errc::numeric, "complexity_score: degenerate hull");
  cs.hull_deficit = std::max(0.0, (vh - v) / vh);
  cs.score = cs.kappa_scaled / kappa0 + cs.hull_deficit;
  return cs;
}

}  // namespace stackcount
