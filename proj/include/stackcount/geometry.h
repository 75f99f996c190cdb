#pragma once
// Triangle-mesh geometry: volume, watertightness, OBJ I/O, convex hulls,
// integrated mean curvature, shape complexity and solid voxelization.

#include <array>
#include <string>
#include <vector>

#include "stackcount/grid.h"
#include "stackcount/util.h"

namespace stackcount {

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;  // CCW outward

  AABB bounds() const {
    AABB b;
    for (const auto& v : vertices) b.expand(v);
    return b;
  }
  void apply(const Rigid& rt) {
    for (auto& v : vertices) v = rt.apply(v);
  }
  void scale(double s) {
    for (auto& v : vertices) v *= s;
  }
  TriMesh transformed(const Rigid& rt) const {
    TriMesh m = *this;
    m.apply(rt);
    return m;
  }
};

struct WatertightReport {
  bool indices_valid = false;    // all faces reference distinct, in-range vertices
  bool edges_paired = false;     // every directed edge used exactly once, both directions
  bool single_component = false; // one face-connected component
  bool positive_volume = false;  // consistently outward-oriented
  bool ok() const { return indices_valid && edges_paired && single_component && positive_volume; }
};

WatertightReport watertight_report(const TriMesh& mesh);

// Signed volume by the divergence theorem (sum of signed tetrahedra about the
// centroid). Throws errc::numeric for meshes that are not watertight.
double mesh_volume(const TriMesh& mesh);

// ASCII OBJ subset: 'v x y z' and triangular 'f' lines (1-based indices,
// optional /vt/vn suffixes ignored). Writer emits 9-decimal fixed precision.
TriMesh read_obj(const std::string& path);
TriMesh parse_obj(const std::string& text, const std::string& origin);
std::string write_obj_text(const TriMesh& mesh);
void write_obj(const std::string& path, const TriMesh& mesh);

// Convex hull of a 3D point set (incremental quickhull with epsilon
// 1e-9 * bbox diagonal and lowest-index tie-breaking). Output mesh contains
// exactly the hull vertices (ascending original index) with outward faces.
// Degenerate input (fewer than 4 non-coplanar points) throws errc::numeric.
TriMesh convex_hull(const std::vector<Vec3>& points);

// Integrated mean curvature of a watertight mesh: sum over edges of
// length(e) * dihedral_angle(e) / 2 with the convex-positive sign convention.
// A unit cube yields 3*pi.
double integrated_mean_curvature(const TriMesh& mesh);

struct ComplexityScore {
  double kappa = 0;         // integrated mean curvature
  double kappa_scaled = 0;  // kappa / bbox diagonal (scale invariant)
  double hull_deficit = 0;  // (V_hull - V) / V_hull, 0 for convex shapes
  double score = 0;         // kappa_scaled / kappa0 + hull_deficit
};

// kappa0 is the dataset-level normalizer: the maximum kappa_scaled over the
// shape population the score is reported against.
ComplexityScore complexity_score(const TriMesh& mesh, double kappa0);

// Solid voxelization by center-point parity along +x ray casts. Sample points
// carry a fixed sub-voxel perturbation so edge/vertex grazings resolve
// consistently. The mesh must be watertight.
VoxelGrid voxelize(const TriMesh& mesh, const Rigid& transform, const Vec3& origin,
                   double voxel, int nx, int ny, int nz);

// Convenience: voxelize onto a grid snapped to the transformed mesh bounds.
VoxelGrid voxelize_fit(const TriMesh& mesh, const Rigid& transform, double voxel);

}  // namespace stackcount
