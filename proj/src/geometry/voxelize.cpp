// Solid voxelization: parity counting of triangle crossings along +x rays
// through voxel centers. Sample points carry a fixed sub-voxel offset so that
// rays grazing edges or vertices resolve to a consistent side; crossings then
// pair up exactly on watertight input.

#include <algorithm>
#include <cmath>

#include "stackcount/geometry.h"

namespace stackcount {

namespace {
// Fixed symbolic perturbation of ray sample points, in voxel units.
constexpr double kEpsY = 7.548776662e-7;
constexpr double kEpsZ = 5.698402910e-7;

double orient_yz(const Vec3& u, const Vec3& v, double py, double pz) {
  return (v.y - u.y) * (pz - u.z) - (v.z - u.z) * (py - u.y);
}
}  // namespace

VoxelGrid voxelize(const TriMesh& mesh, const Rigid& transform, const Vec3& origin,
                   double voxel, int nx, int ny, int nz) {
  if (!(voxel > 0)) fail(errc::config, "voxelize: voxel size must be positive");
  WatertightReport rep = watertight_report(mesh);
  if (!rep.edges_paired || !rep.indices_valid)
    fail(errc::numeric, "voxelize requires a watertight mesh");

  VoxelGrid grid(nx, ny, nz, voxel, origin);

  // Vertices in voxel units relative to the grid origin.
  std::vector<Vec3> pts(mesh.vertices.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    Vec3 w = transform.apply(mesh.vertices[i]);
    pts[i] = {(w.x - origin.x) / voxel, (w.y - origin.y) / voxel, (w.z - origin.z) / voxel};
  }

  std::vector<std::vector<double>> crossings(size_t(ny) * nz);
  for (const auto& f : mesh.faces) {
    const Vec3& a = pts[size_t(f[0])];
    const Vec3& b = pts[size_t(f[1])];
    const Vec3& c = pts[size_t(f[2])];
    Vec3 n = cross(b - a, c - a);
    if (n.x == 0.0) continue;  // parallel to the ray direction: no crossings

    double ylo = std::min({a.y, b.y, c.y}), yhi = std::max({a.y, b.y, c.y});
    double zlo = std::min({a.z, b.z, c.z}), zhi = std::max({a.z, b.z, c.z});
    int j0 = std::max(0, int(std::floor(ylo - 0.5)) - 1);
    int j1 = std::min(ny - 1, int(std::ceil(yhi)) + 1);
    int k0 = std::max(0, int(std::floor(zlo - 0.5)) - 1);
    int k1 = std::min(nz - 1, int(std::ceil(zhi)) + 1);
    for (int k = k0; k <= k1; ++k) {
      double pz = k + 0.5 + kEpsZ;
      if (pz < zlo || pz > zhi) continue;
      for (int j = j0; j <= j1; ++j) {
        double py = j + 0.5 + kEpsY;
        if (py < ylo || py > yhi) continue;
        double s0 = orient_yz(a, b, py, pz);
        double s1 = orient_yz(b, c, py, pz);
        double s2 = orient_yz(c, a, py, pz);
        bool inside = (s0 > 0 && s1 > 0 && s2 > 0) || (s0 < 0 && s1 < 0 && s2 < 0);
        if (!inside) continue;
        double x = a.x - (n.y * (py - a.y) + n.z * (pz - a.z)) / n.x;
        crossings[size_t(k) * ny + j].push_back(x);
      }
    }
  }

  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j) {
      auto& row = crossings[size_t(k) * ny + j];
      if (row.empty()) continue;
      if (row.size() & 1)
        fail(errc::numeric, "voxelize: parity failure (unpaired surface crossing)");
      std::sort(row.begin(), row.end());
      for (size_t m = 0; m + 1 < row.size(); m += 2) {
        // Centers with row[m] <= i + 0.5 < row[m+1].
        int i0 = int(std::ceil(row[m] - 0.5));
        int i1 = int(std::ceil(row[m + 1] - 0.5)) - 1;
        i0 = std::max(i0, 0);
        i1 = std::min(i1, nx - 1);
        for (int i = i0; i <= i1; ++i) grid.set(i, j, k, true);
      }
    }
  return grid;
}

VoxelGrid voxelize_fit(const TriMesh& mesh, const Rigid& transform, double voxel) {
  AABB b;
  for (const auto& v : mesh.vertices) b.expand(transform.apply(v));
  if (!b.valid()) fail(errc::numeric, "voxelize_fit: empty mesh");
  Vec3 ext = b.extent();
  int nx = std::max(1, int(std::ceil(ext.x / voxel - 1e-9)));
  int ny = std::max(1, int(std::ceil(ext.y / voxel - 1e-9)));
  int nz = std::max(1, int(std::ceil(ext.z / voxel - 1e-9)));
  return voxelize(mesh, transform, b.lo, voxel, nx, ny, nz);
}

}  // namespace stackcount
