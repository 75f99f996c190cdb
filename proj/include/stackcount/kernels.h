#pragma once
// Data-parallel inner-loop kernels. Every kernel has a scalar reference
// implementation and (on x86-64) an AVX2 variant; the active set is chosen at
// runtime from CPU features, overridable through STACKCOUNT_SIMD or
// set_mode(). The two variants are bit-exact for identical inputs: each
// element is computed with the same expression order (explicit multiply+add,
// no FMA), reductions are limited to order-insensitive operations, and the
// kernel translation units are built with -ffp-contract=off.
//
// Buffer contracts:
//  * carve_row reads mask bytes through 4-byte gathers: the mask buffer must
//    have at least 4 bytes of tail slack after w*h entries.
//  * conv3x3_s2 reads input rows through 16-float even-stride loads: float
//    tensors passed in must have at least 8 floats of tail slack.

#include <cstddef>
#include <cstdint>

namespace stackcount::kernels {

// Camera-space view data for carving one x-contiguous row of voxel centers.
struct CarveView {
  float q0[3];  // camera-space position of the row's first voxel center
  float dq[3];  // camera-space step per +x voxel
  float fx, fy, cx, cy;
  int w = 0, h = 0;
  const float* depth = nullptr;   // w*h z-depths, row-major v*w+u
  const uint8_t* mask = nullptr;  // w*h bytes (nonzero = inside), +4 tail slack
  float slack = 0;                // survive if qz >= depth - slack; a non-finite
                                  // depth counts as "no reading" and never carves
};

struct Table {
  const char* name;
  uint64_t (*popcount)(const uint64_t* words, size_t n);
  void (*and_words)(uint64_t* dst, const uint64_t* src, size_t n);
  // Min/max over masked entries; returns the masked count (mn/mx only written
  // when the count is nonzero). Values must be finite.
  int (*minmax_masked)(const float* v, const uint8_t* mask, int n, float* mn, float* mx);
  // p[i] = (p[i] - offset) * scale
  void (*affine)(float* p, int n, float offset, float scale);
  // 3x3 convolution, stride 2, zero padding 1, even h/w, optional ReLU.
  // weights layout [c_out][c_in][3][3]; out is [c_out][h/2][w/2].
  void (*conv3x3_s2)(const float* in, int c_in, int h, int w, const float* weights,
                     const float* bias, float* out, int c_out, bool relu);
  // Clears bits 0..n-1 of `words` for voxels carved by this view.
  void (*carve_row)(const CarveView& view, int n, uint64_t* words);
};

enum class SimdMode { scalar, avx2 };

bool avx2_supported();
const Table& scalar_table();
const Table* avx2_table();  // nullptr when the build/CPU cannot run AVX2

// Active table: initialized from STACKCOUNT_SIMD (auto|scalar|avx2, default
// auto = best supported). set_mode throws errc::config for an unsupported
// explicit request.
const Table& active();
void set_mode(SimdMode m);
void set_mode_from_string(const char* name);  // "auto", "scalar", "avx2"
SimdMode current_mode();

}  // namespace stackcount::kernels
