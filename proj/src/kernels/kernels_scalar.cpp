// Scalar reference kernels. These define the semantics the SIMD variants must
// reproduce bit-for-bit, so the per-element expression order here is part of
// the contract: one multiply and one add per projected coordinate, division
// before scaling, explicit (x > 0 ? x : 0) ReLU.

#include <cmath>
#include <limits>

#include "stackcount/kernels.h"

namespace stackcount::kernels {

namespace {

uint64_t popcount_scalar(const uint64_t* words, size_t n) {
  uint64_t total = 0;
  for (size_t i = 0; i < n; ++i) total += uint64_t(__builtin_popcountll(words[i]));
  return total;
}

void and_words_scalar(uint64_t* dst, const uint64_t* src, size_t n) {
  for (size_t i = 0; i < n; ++i) dst[i] &= src[i];
}

int minmax_masked_scalar(const float* v, const uint8_t* mask, int n, float* mn, float* mx) {
  float lo = 0, hi = 0;
  int count = 0;
  for (int i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    if (count == 0) {
      lo = hi = v[i];
    } else {
      if (v[i] < lo) lo = v[i];
      if (v[i] > hi) hi = v[i];
    }
    ++count;
  }
  if (count) {
    *mn = lo;
    *mx = hi;
  }
  return count;
}

void affine_scalar(float* p, int n, float offset, float scale) {
  for (int i = 0; i < n; ++i) p[i] = (p[i] - offset) * scale;
}

void conv3x3_s2_scalar(const float* in, int c_in, int h, int w, const float* weights,
                       const float* bias, float* out, int c_out, bool relu) {
  const int ho = h / 2, wo = w / 2;
  for (int co = 0; co < c_out; ++co) {
    for (int oy = 0; oy < ho; ++oy) {
      float* orow = out + (size_t(co) * ho + oy) * wo;
      for (int ox = 0; ox < wo; ++ox) {
        float acc = bias[co];
        const float* wk = weights + size_t(co) * c_in * 9;
        for (int ci = 0; ci < c_in; ++ci, wk += 9) {
          const float* ich = in + size_t(ci) * h * w;
          for (int ky = 0; ky < 3; ++ky) {
            int iy = 2 * oy + ky - 1;
            if (iy < 0 || iy >= h) continue;
            const float* irow = ich + size_t(iy) * w;
            for (int kx = 0; kx < 3; ++kx) {
              int ix = 2 * ox + kx - 1;
              if (ix < 0 || ix >= w) continue;
              acc += wk[3 * ky + kx] * irow[ix];
            }
          }
        }
        orow[ox] = relu ? (acc > 0.0f ? acc : 0.0f) : acc;
      }
    }
  }
}

void carve_row_scalar(const CarveView& view, int n, uint64_t* words) {
  const float zmin = 1e-6f;
  const float kDepthMax = std::numeric_limits<float>::max();
  const float wf = float(view.w), hf = float(view.h);
  for (int k = 0; k < n; ++k) {
    float kf = float(k);
    float qx = view.q0[0] + kf * view.dq[0];
    float qy = view.q0[1] + kf * view.dq[1];
    float qz = view.q0[2] + kf * view.dq[2];
    bool keep = false;
    if (qz >= zmin) {
      float u = (qx / qz) * view.fx + view.cx;
      float v = (qy / qz) * view.fy + view.cy;
      if (u >= 0.0f && u < wf && v >= 0.0f && v < hf) {
        int iu = int(std::floor(u));
        int iv = int(std::floor(v));
        int idx = iv * view.w + iu;
        if (view.mask[idx]) {
          float d = view.depth[idx];
          // Non-finite depth is "no reading": the mask alone cannot carve.
          keep = qz >= d - view.slack || !(d <= kDepthMax);
        }
      }
    }
    if (!keep) words[k >> 6] &= ~(1ull << (k & 63));
  }
}

}  // namespace

const Table& scalar_table() {
  static const Table t{"scalar",        popcount_scalar, and_words_scalar,
                       minmax_masked_scalar, affine_scalar,   conv3x3_s2_scalar,
                       carve_row_scalar};
  return t;
}

}  // namespace stackcount::kernels
