#pragma once
// Bit-packed occupancy grid and a byte-labelled grid for rendering.
//
// VoxelGrid packs voxels along x into 64-bit words, one padded row per (y, z).
// Invariant: padding bits past nx in the last word of each row are always
// zero, so popcounts and word-wise set operations are exact.

#include <cmath>
#include <cstdint>
#include <vector>

#include "stackcount/util.h"

namespace stackcount {

struct VoxelGrid {
  int nx = 0, ny = 0, nz = 0;
  double voxel = 0;  // edge length of a voxel (cubic)
  Vec3 origin;       // world position of the grid's min corner
  int row_words = 0;
  std::vector<uint64_t> bits;

  VoxelGrid() = default;
  VoxelGrid(int nx_, int ny_, int nz_, double voxel_, const Vec3& origin_)
      : nx(nx_), ny(ny_), nz(nz_), voxel(voxel_), origin(origin_) {
    if (nx <= 0 || ny <= 0 || nz <= 0) fail(errc::config, "voxel grid dims must be positive");
    row_words = (nx + 63) / 64;
    bits.assign(size_t(row_words) * ny * nz, 0);
  }

  size_t row_index(int y, int z) const { return (size_t(z) * ny + y) * row_words; }
  uint64_t* row(int y, int z) { return bits.data() + row_index(y, z); }
  const uint64_t* row(int y, int z) const { return bits.data() + row_index(y, z); }

  bool inside(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < nx && y < ny && z < nz;
  }
  bool get(int x, int y, int z) const {
    return (row(y, z)[x >> 6] >> (x & 63)) & 1u;
  }
  void set(int x, int y, int z, bool v) {
    uint64_t& w = row(y, z)[x >> 6];
    uint64_t m = 1ull << (x & 63);
    if (v)
      w |= m;
    else
      w &= ~m;
  }

  // Mask for the last word of a row (zeroes the padding bits).
  uint64_t tail_mask() const {
    int used = nx & 63;
    return used == 0 ? ~0ull : ((1ull << used) - 1);
  }

  void fill(bool v);
  uint64_t count() const;  // number of set voxels
  double volume() const { return double(count()) * voxel * voxel * voxel; }

  Vec3 center_of(int x, int y, int z) const {
    return {origin.x + (x + 0.5) * voxel, origin.y + (y + 0.5) * voxel,
            origin.z + (z + 0.5) * voxel};
  }

  // Index of the voxel containing a world point; false if outside the grid.
  bool point_index(const Vec3& p, int out[3]) const {
    out[0] = int(std::floor((p.x - origin.x) / voxel));
    out[1] = int(std::floor((p.y - origin.y) / voxel));
    out[2] = int(std::floor((p.z - origin.z) / voxel));
    return inside(out[0], out[1], out[2]);
  }
  bool inside_point(const Vec3& p) const {
    int i[3];
    return point_index(p, i);
  }
  bool get_point(const Vec3& p) const {
    int i[3];
    return point_index(p, i) && get(i[0], i[1], i[2]);
  }

  // Tight index bounds of set voxels; false if the grid is empty.
  bool occupied_bounds(int lo[3], int hi[3]) const;

  bool same_shape(const VoxelGrid& o) const {
    return nx == o.nx && ny == o.ny && nz == o.nz;
  }
  // this &= other / this |= other (shapes must match).
  void intersect_with(const VoxelGrid& o);
  void union_with(const VoxelGrid& o);
  // True if every set voxel of this grid is also set in `o`.
  bool subset_of(const VoxelGrid& o) const;
};

// Byte-per-voxel grid used as the renderer's scene representation.
struct ByteGrid {
  int nx = 0, ny = 0, nz = 0;
  double voxel = 0;
  Vec3 origin;
  std::vector<uint8_t> v;

  ByteGrid() = default;
  ByteGrid(int nx_, int ny_, int nz_, double voxel_, const Vec3& origin_)
      : nx(nx_), ny(ny_), nz(nz_), voxel(voxel_), origin(origin_) {
    if (nx <= 0 || ny <= 0 || nz <= 0) fail(errc::config, "byte grid dims must be positive");
    v.assign(size_t(nx) * ny * nz, 0);
  }
  size_t idx(int x, int y, int z) const { return (size_t(z) * ny + y) * nx + x; }
  uint8_t at(int x, int y, int z) const { return v[idx(x, y, z)]; }
  void put(int x, int y, int z, uint8_t label) { v[idx(x, y, z)] = label; }
  bool inside(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < nx && y < ny && z < nz;
  }
  bool point_index(const Vec3& p, int out[3]) const {
    out[0] = int(std::floor((p.x - origin.x) / voxel));
    out[1] = int(std::floor((p.y - origin.y) / voxel));
    out[2] = int(std::floor((p.z - origin.z) / voxel));
    return inside(out[0], out[1], out[2]);
  }
  bool inside_point(const Vec3& p) const {
    int i[3];
    return point_index(p, i);
  }
  uint8_t at_point(const Vec3& p) const {
    int i[3];
    return point_index(p, i) ? at(i[0], i[1], i[2]) : uint8_t(0);
  }
  AABB bounds() const {
    AABB b;
    b.expand(origin);
    b.expand({origin.x + nx * voxel, origin.y + ny * voxel, origin.z + nz * voxel});
    return b;
  }
};

}  // namespace stackcount
