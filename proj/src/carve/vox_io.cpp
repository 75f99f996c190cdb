// Carved-grid persistence and inspection: the VOX1 binary dump and the
// boundary-quad surface mesh.

#include <bit>
#include <cmath>
#include <cstring>
#include <unordered_map>

#include "stackcount/carve.h"

namespace stackcount {
namespace {

static_assert(std::endian::native == std::endian::little,
              "voxel file I/O assumes a little-endian host");

constexpr char kMagic[4] = {'V', 'O', 'X', '1'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(b, sizeof(T));
}

template <typename T>
T take(const std::string& in, size_t* off) {
  T v;
  std::memcpy(&v, in.data() + *off, sizeof(T));
  *off += sizeof(T);
  return v;
}

// Outward-CCW corner offsets per face, order +x, -x, +y, -y, +z, -z.
constexpr int kFaceStep[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                 {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
constexpr int kFaceCorners[6][4][3] = {
    {{1, 0, 0}, {1, 1, 0}, {1, 1, 1}, {1, 0, 1}},
    {{0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {0, 1, 0}},
    {{0, 1, 0}, {0, 1, 1}, {1, 1, 1}, {1, 1, 0}},
    {{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1}},
    {{0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}},
    {{0, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, 0, 0}}};

}  // namespace

void save_voxels(const std::string& path, const VoxelGrid& grid) {
  if (grid.nx <= 0 || grid.bits.empty()) fail(errc::config, "refusing to save an unsized grid");
  if (!(grid.voxel > 0.0) || !std::isfinite(grid.voxel))
    fail(errc::numeric, "refusing to save a grid with a degenerate voxel size");
  std::string out;
  out.append(kMagic, 4);
  put(out, kVersion);
  put(out, uint32_t(grid.nx));
  put(out, uint32_t(grid.ny));
  put(out, uint32_t(grid.nz));
  put(out, grid.voxel);
  put(out, grid.origin.x);
  put(out, grid.origin.y);
  put(out, grid.origin.z);
  put(out, uint64_t(grid.bits.size()));
  out.append(reinterpret_cast<const char*>(grid.bits.data()), grid.bits.size() * 8);
  put(out, crc32_bytes(out.data(), out.size()));
  write_file(path, out);
}

VoxelGrid load_voxels(const std::string& path) {
  std::string in = read_file(path);
  constexpr size_t kHeader = 4 + 4 + 12 + 8 + 24 + 8;
  if (in.size() < kHeader + 4 || std::memcmp(in.data(), kMagic, 4) != 0)
    fail(errc::config, "not a voxel dump: " + path);

  uint32_t stored_crc;
  std::memcpy(&stored_crc, in.data() + in.size() - 4, 4);
  if (stored_crc != crc32_bytes(in.data(), in.size() - 4))
    fail(errc::config, "voxel dump failed its checksum: " + path);

  size_t off = 4;
  if (take<uint32_t>(in, &off) != kVersion)
    fail(errc::config, "unsupported voxel dump version: " + path);
  const uint32_t nx = take<uint32_t>(in, &off);
  const uint32_t ny = take<uint32_t>(in, &off);
  const uint32_t nz = take<uint32_t>(in, &off);
  const double voxel = take<double>(in, &off);
  Vec3 origin;
  origin.x = take<double>(in, &off);
  origin.y = take<double>(in, &off);
  origin.z = take<double>(in, &off);
  const uint64_t words = take<uint64_t>(in, &off);
  if (nx == 0 || ny == 0 || nz == 0 || nx > (1u << 20) || ny > (1u << 20) || nz > (1u << 20))
    fail(errc::config, "voxel dump has degenerate dimensions: " + path);
  if (!(voxel > 0.0) || !std::isfinite(voxel) || !std::isfinite(origin.x) ||
      !std::isfinite(origin.y) || !std::isfinite(origin.z))
    fail(errc::config, "voxel dump has a degenerate placement: " + path);
  const uint64_t expect_words = uint64_t((nx + 63) / 64) * ny * nz;
  if (words != expect_words || in.size() != kHeader + words * 8 + 4)
    fail(errc::config, "truncated voxel dump: " + path);

  VoxelGrid grid(int(nx), int(ny), int(nz), voxel, origin);
  std::memcpy(grid.bits.data(), in.data() + off, words * 8);
  const uint64_t tail = grid.tail_mask();
  for (int z = 0; z < grid.nz; ++z)
    for (int y = 0; y < grid.ny; ++y)
      if (grid.row(y, z)[grid.row_words - 1] & ~tail)
        fail(errc::config, "voxel dump has stray padding bits: " + path);
  return grid;
}

TriMesh voxel_surface_mesh(const VoxelGrid& grid) {
  TriMesh mesh;
  if (grid.bits.empty()) return mesh;
  // Shared corner vertices keep the boundary watertight; ids are assigned in
  // first-use order so the output is deterministic.
  std::unordered_map<uint64_t, int> corner_ids;
  const uint64_t sx = uint64_t(grid.nx) + 1, sy = uint64_t(grid.ny) + 1;
  auto corner = [&](int x, int y, int z) {
    const uint64_t key = (uint64_t(z) * sy + y) * sx + x;
    auto [it, fresh] = corner_ids.try_emplace(key, int(mesh.vertices.size()));
    if (fresh)
      mesh.vertices.push_back({grid.origin.x + x * grid.voxel, grid.origin.y + y * grid.voxel,
                               grid.origin.z + z * grid.voxel});
    return it->second;
  };
  for (int z = 0; z < grid.nz; ++z)
    for (int y = 0; y < grid.ny; ++y)
      for (int x = 0; x < grid.nx; ++x) {
        if (!grid.get(x, y, z)) continue;
        for (int f = 0; f < 6; ++f) {
          const int nxp = x + kFaceStep[f][0], nyp = y + kFaceStep[f][1],
                    nzp = z + kFaceStep[f][2];
          if (grid.inside(nxp, nyp, nzp) && grid.get(nxp, nyp, nzp)) continue;
          int q[4];
          for (int c = 0; c < 4; ++c)
            q[c] = corner(x + kFaceCorners[f][c][0], y + kFaceCorners[f][c][1],
                          z + kFaceCorners[f][c][2]);
          mesh.faces.push_back({q[0], q[1], q[2]});
          mesh.faces.push_back({q[0], q[2], q[3]});
        }
      }
  return mesh;
}

}  // namespace stackcount
