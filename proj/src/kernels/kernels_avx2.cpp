// AVX2 kernel variants. Bit-exact with the scalar reference: identical
// per-element expression order (multiply then add, division before scaling,
// no FMA), gathers masked to live lanes only, borders and tails delegated to
// loops that repeat the scalar expressions verbatim. Built with -mavx2 and
// -ffp-contract=off; selected at runtime only when the CPU reports AVX2.

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "stackcount/kernels.h"

namespace stackcount::kernels {

namespace {

uint64_t popcount_avx2(const uint64_t* words, size_t n) {
  uint64_t t0 = 0, t1 = 0, t2 = 0, t3 = 0;
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    t0 += uint64_t(__builtin_popcountll(words[i]));
    t1 += uint64_t(__builtin_popcountll(words[i + 1]));
    t2 += uint64_t(__builtin_popcountll(words[i + 2]));
    t3 += uint64_t(__builtin_popcountll(words[i + 3]));
  }
  for (; i < n; ++i) t0 += uint64_t(__builtin_popcountll(words[i]));
  return t0 + t1 + t2 + t3;
}

void and_words_avx2(uint64_t* dst, const uint64_t* src, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256i a = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(dst + i));
    __m256i b = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(src + i));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i), _mm256_and_si256(a, b));
  }
  for (; i < n; ++i) dst[i] &= src[i];
}

int minmax_masked_avx2(const float* v, const uint8_t* mask, int n, float* mn, float* mx) {
  const float inf = __builtin_huge_valf();
  __m256 lo8 = _mm256_set1_ps(inf), hi8 = _mm256_set1_ps(-inf);
  int count = 0;
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    __m128i mb = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(mask + i));
    __m256i m32 = _mm256_cvtepu8_epi32(mb);
    __m256 act = _mm256_castsi256_ps(_mm256_cmpgt_epi32(m32, _mm256_setzero_si256()));
    __m256 vals = _mm256_loadu_ps(v + i);
    lo8 = _mm256_min_ps(lo8, _mm256_blendv_ps(_mm256_set1_ps(inf), vals, act));
    hi8 = _mm256_max_ps(hi8, _mm256_blendv_ps(_mm256_set1_ps(-inf), vals, act));
    count += __builtin_popcount(unsigned(_mm256_movemask_ps(act)));
  }
  float lo = inf, hi = -inf;
  alignas(32) float tmp[8];
  _mm256_store_ps(tmp, lo8);
  for (float t : tmp) lo = t < lo ? t : lo;
  _mm256_store_ps(tmp, hi8);
  for (float t : tmp) hi = t > hi ? t : hi;
  for (; i < n; ++i) {
    if (!mask[i]) continue;
    lo = v[i] < lo ? v[i] : lo;
    hi = v[i] > hi ? v[i] : hi;
    ++count;
  }
  if (count) {
    *mn = lo;
    *mx = hi;
  }
  return count;
}

void affine_avx2(float* p, int n, float offset, float scale) {
  __m256 off = _mm256_set1_ps(offset), sc = _mm256_set1_ps(scale);
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 x = _mm256_loadu_ps(p + i);
    _mm256_storeu_ps(p + i, _mm256_mul_ps(_mm256_sub_ps(x, off), sc));
  }
  for (; i < n; ++i) p[i] = (p[i] - offset) * scale;
}

// Loads floats p[0], p[2], ..., p[14] into one vector (reads 16 floats).
inline __m256 load_even(const float* p) {
  __m256 v0 = _mm256_loadu_ps(p);
  __m256 v1 = _mm256_loadu_ps(p + 8);
  __m256 t = _mm256_shuffle_ps(v0, v1, 0x88);
  const __m256i perm = _mm256_setr_epi32(0, 1, 4, 5, 2, 3, 6, 7);
  return _mm256_permutevar8x32_ps(t, perm);
}

// Scalar-identical single output; used for borders and tails.
inline float conv_one(const float* in, int c_in, int h, int w, const float* wk0,
                      float bias, int oy, int ox) {
  float acc = bias;
  const float* wk = wk0;
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
  return acc;
}

void conv3x3_s2_avx2(const float* in, int c_in, int h, int w, const float* weights,
                     const float* bias, float* out, int c_out, bool relu) {
  const int ho = h / 2, wo = w / 2;
  for (int co = 0; co < c_out; ++co) {
    const float* wk0 = weights + size_t(co) * c_in * 9;
    for (int oy = 0; oy < ho; ++oy) {
      float* orow = out + (size_t(co) * ho + oy) * wo;
      // ox = 0 has a left tap off the grid; keep it scalar.
      {
        float acc = conv_one(in, c_in, h, w, wk0, bias[co], oy, 0);
        orow[0] = relu ? (acc > 0.0f ? acc : 0.0f) : acc;
      }
      int ox = 1;
      for (; ox + 8 <= wo; ox += 8) {
        __m256 acc = _mm256_set1_ps(bias[co]);
        const float* wk = wk0;
        for (int ci = 0; ci < c_in; ++ci, wk += 9) {
          const float* ich = in + size_t(ci) * h * w;
          for (int ky = 0; ky < 3; ++ky) {
            int iy = 2 * oy + ky - 1;
            if (iy < 0 || iy >= h) continue;
            const float* irow = ich + size_t(iy) * w;
            for (int kx = 0; kx < 3; ++kx) {
              const float* base = irow + 2 * ox + kx - 1;
              __m256 wv = _mm256_set1_ps(wk[3 * ky + kx]);
              acc = _mm256_add_ps(acc, _mm256_mul_ps(wv, load_even(base)));
            }
          }
        }
        if (relu) acc = _mm256_max_ps(acc, _mm256_setzero_ps());
        _mm256_storeu_ps(orow + ox, acc);
      }
      for (; ox < wo; ++ox) {
        float acc = conv_one(in, c_in, h, w, wk0, bias[co], oy, ox);
        orow[ox] = relu ? (acc > 0.0f ? acc : 0.0f) : acc;
      }
    }
  }
}

// Scalar-identical carve for tail voxels.
inline void carve_tail(const CarveView& view, int k0, int k1, uint64_t* words) {
  const float zmin = 1e-6f;
  const float kDepthMax = std::numeric_limits<float>::max();
  const float wf = float(view.w), hf = float(view.h);
  for (int k = k0; k < k1; ++k) {
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

void carve_row_avx2(const CarveView& view, int n, uint64_t* words) {
  const __m256 zmin = _mm256_set1_ps(1e-6f);
  const __m256 q0x = _mm256_set1_ps(view.q0[0]), q0y = _mm256_set1_ps(view.q0[1]),
               q0z = _mm256_set1_ps(view.q0[2]);
  const __m256 dqx = _mm256_set1_ps(view.dq[0]), dqy = _mm256_set1_ps(view.dq[1]),
               dqz = _mm256_set1_ps(view.dq[2]);
  const __m256 fx = _mm256_set1_ps(view.fx), fy = _mm256_set1_ps(view.fy);
  const __m256 cx = _mm256_set1_ps(view.cx), cy = _mm256_set1_ps(view.cy);
  const __m256 zero = _mm256_setzero_ps();
  const __m256 wf = _mm256_set1_ps(float(view.w)), hf = _mm256_set1_ps(float(view.h));
  const __m256 slack = _mm256_set1_ps(view.slack);
  const __m256 dmax = _mm256_set1_ps(std::numeric_limits<float>::max());
  const __m256i wstep = _mm256_set1_epi32(view.w);
  const __m256i lane = _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7);

  int k = 0;
  for (; k + 8 <= n; k += 8) {
    __m256 kf = _mm256_cvtepi32_ps(_mm256_add_epi32(_mm256_set1_epi32(k), lane));
    __m256 qx = _mm256_add_ps(q0x, _mm256_mul_ps(kf, dqx));
    __m256 qy = _mm256_add_ps(q0y, _mm256_mul_ps(kf, dqy));
    __m256 qz = _mm256_add_ps(q0z, _mm256_mul_ps(kf, dqz));

    __m256 alive = _mm256_cmp_ps(qz, zmin, _CMP_GE_OQ);
    __m256 u = _mm256_add_ps(_mm256_mul_ps(_mm256_div_ps(qx, qz), fx), cx);
    __m256 v = _mm256_add_ps(_mm256_mul_ps(_mm256_div_ps(qy, qz), fy), cy);
    __m256 inb = _mm256_and_ps(
        _mm256_and_ps(_mm256_cmp_ps(u, zero, _CMP_GE_OQ), _mm256_cmp_ps(u, wf, _CMP_LT_OQ)),
        _mm256_and_ps(_mm256_cmp_ps(v, zero, _CMP_GE_OQ), _mm256_cmp_ps(v, hf, _CMP_LT_OQ)));
    alive = _mm256_and_ps(alive, inb);
    if (_mm256_movemask_ps(alive)) {
      __m256i iu = _mm256_cvtps_epi32(_mm256_floor_ps(u));
      __m256i iv = _mm256_cvtps_epi32(_mm256_floor_ps(v));
      __m256i idx = _mm256_add_epi32(_mm256_mullo_epi32(iv, wstep), iu);
      // Mask bytes via 4-byte gathers (buffer has 4 bytes tail slack).
      __m256i mraw = _mm256_mask_i32gather_epi32(
          _mm256_setzero_si256(), reinterpret_cast<const int*>(view.mask), idx,
          _mm256_castps_si256(alive), 1);
      __m256i mbyte = _mm256_and_si256(mraw, _mm256_set1_epi32(0xFF));
      __m256 masked =
          _mm256_castsi256_ps(_mm256_cmpgt_epi32(mbyte, _mm256_setzero_si256()));
      alive = _mm256_and_ps(alive, masked);
      __m256 dgat = _mm256_mask_i32gather_ps(zero, view.depth, idx, alive, 4);
      __m256 limit = _mm256_sub_ps(dgat, slack);
      // NLE_UQ against FLT_MAX matches the scalar !(d <= kDepthMax) branch.
      __m256 pass = _mm256_or_ps(_mm256_cmp_ps(qz, limit, _CMP_GE_OQ),
                                 _mm256_cmp_ps(dgat, dmax, _CMP_NLE_UQ));
      alive = _mm256_and_ps(alive, pass);
    }
    uint64_t keep = uint64_t(unsigned(_mm256_movemask_ps(alive)));
    uint64_t clear = (~keep & 0xFFull) << (k & 63);
    words[k >> 6] &= ~clear;
  }
  carve_tail(view, k, n, words);
}

}  // namespace

const Table* avx2_table() {
  static const Table t{"avx2",         popcount_avx2, and_words_avx2, minmax_masked_avx2,
                       affine_avx2, conv3x3_s2_avx2, carve_row_avx2};
  return &t;
}

}  // namespace stackcount::kernels
