#include "stackcount/grid.h"

#include "stackcount/kernels.h"

namespace stackcount {

void VoxelGrid::fill(bool v) {
  if (!v) {
    std::fill(bits.begin(), bits.end(), 0ull);
    return;
  }
  std::fill(bits.begin(), bits.end(), ~0ull);
  // Re-establish the padding invariant on every row tail.
  uint64_t tm = tail_mask();
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y) row(y, z)[row_words - 1] &= tm;
}

uint64_t VoxelGrid::count() const {
  return kernels::active().popcount(bits.data(), bits.size());
}

bool VoxelGrid::occupied_bounds(int lo[3], int hi[3]) const {
  lo[0] = nx;
  lo[1] = ny;
  lo[2] = nz;
  hi[0] = hi[1] = hi[2] = -1;
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y) {
      const uint64_t* r = row(y, z);
      for (int w = 0; w < row_words; ++w) {
        uint64_t bitsw = r[w];
        if (!bitsw) continue;
        int x0 = w * 64 + __builtin_ctzll(bitsw);
        int x1 = w * 64 + 63 - __builtin_clzll(bitsw);
        if (x0 < lo[0]) lo[0] = x0;
        if (x1 > hi[0]) hi[0] = x1;
        if (y < lo[1]) lo[1] = y;
        if (y > hi[1]) hi[1] = y;
        if (z < lo[2]) lo[2] = z;
        if (z > hi[2]) hi[2] = z;
      }
    }
  return hi[0] >= 0;
}

void VoxelGrid::intersect_with(const VoxelGrid& o) {
  if (!same_shape(o)) fail(errc::config, "grid shape mismatch in intersect");
  kernels::active().and_words(bits.data(), o.bits.data(), bits.size());
}

void VoxelGrid::union_with(const VoxelGrid& o) {
  if (!same_shape(o)) fail(errc::config, "grid shape mismatch in union");
  for (size_t i = 0; i < bits.size(); ++i) bits[i] |= o.bits[i];
}

bool VoxelGrid::subset_of(const VoxelGrid& o) const {
  if (!same_shape(o)) fail(errc::config, "grid shape mismatch in subset test");
  for (size_t i = 0; i < bits.size(); ++i)
    if (bits[i] & ~o.bits[i]) return false;
  return true;
}

}  // namespace stackcount
