// Kernel correctness oracles plus scalar/AVX2 equivalence. The equivalence
// checks are bitwise: both variants must produce identical outputs, which is
// what makes SIMD mode selection invisible to every downstream result.

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "stackcount/kernels.h"
#include "stackcount/util.h"

using namespace stackcount;
namespace k = stackcount::kernels;

namespace {

// Float buffer with the 8-float tail slack the conv kernel contract requires.
std::vector<float> slack_buffer(size_t n, Rng* rng = nullptr) {
  std::vector<float> v(n + 8, 0.0f);
  if (rng)
    for (size_t i = 0; i < n; ++i) v[i] = float(rng->uniform(-2.0, 2.0));
  return v;
}

// Independent double-precision convolution reference for correctness.
void conv_ref_double(const float* in, int cin, int h, int w, const float* wt,
                     const float* bias, float* out, int cout, bool relu) {
  int ho = h / 2, wo = w / 2;
  for (int co = 0; co < cout; ++co)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        double acc = bias[co];
        for (int ci = 0; ci < cin; ++ci)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              int iy = 2 * oy + ky - 1, ix = 2 * ox + kx - 1;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += double(wt[((co * cin + ci) * 9) + 3 * ky + kx]) *
                     double(in[(size_t(ci) * h + iy) * w + ix]);
            }
        if (relu && acc < 0) acc = 0;
        out[(size_t(co) * ho + oy) * wo + ox] = float(acc);
      }
}

}  // namespace

TEST_CASE("popcount and and_words") {
  Rng rng(11);
  std::vector<uint64_t> a(37), b(37);
  uint64_t expect = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.u64();
    b[i] = rng.u64();
  }
  for (uint64_t w : a) {
    uint64_t c = 0;
    for (int bit = 0; bit < 64; ++bit) c += (w >> bit) & 1;
    expect += c;
  }
  CHECK(k::scalar_table().popcount(a.data(), a.size()) == expect);
  if (k::avx2_supported()) CHECK(k::avx2_table()->popcount(a.data(), a.size()) == expect);

  std::vector<uint64_t> d1 = a, d2 = a;
  k::scalar_table().and_words(d1.data(), b.data(), d1.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(d1[i] == (a[i] & b[i]));
  if (k::avx2_supported()) {
    k::avx2_table()->and_words(d2.data(), b.data(), d2.size());
    CHECK(d1 == d2);
  }
}

TEST_CASE("minmax_masked oracle and equivalence") {
  Rng rng(22);
  for (int n : {0, 1, 7, 8, 64, 301}) {
    std::vector<float> v(static_cast<size_t>(n));
    std::vector<uint8_t> m(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      v[size_t(i)] = float(rng.uniform(-100, 100));
      m[size_t(i)] = rng.uniform() < 0.6 ? 1 : 0;
    }
    float lo_ref = 0, hi_ref = 0;
    int cnt_ref = 0;
    for (int i = 0; i < n; ++i)
      if (m[size_t(i)]) {
        if (cnt_ref == 0 || v[size_t(i)] < lo_ref) lo_ref = cnt_ref ? std::min(lo_ref, v[size_t(i)]) : v[size_t(i)];
        if (cnt_ref == 0 || v[size_t(i)] > hi_ref) hi_ref = cnt_ref ? std::max(hi_ref, v[size_t(i)]) : v[size_t(i)];
        ++cnt_ref;
      }
    float lo1 = 0, hi1 = 0, lo2 = 0, hi2 = 0;
    int c1 = k::scalar_table().minmax_masked(v.data(), m.data(), n, &lo1, &hi1);
    CHECK(c1 == cnt_ref);
    if (cnt_ref) {
      CHECK(lo1 == lo_ref);
      CHECK(hi1 == hi_ref);
    }
    if (k::avx2_supported()) {
      int c2 = k::avx2_table()->minmax_masked(v.data(), m.data(), n, &lo2, &hi2);
      CHECK(c2 == c1);
      if (cnt_ref) {
        CHECK(lo2 == lo1);
        CHECK(hi2 == hi1);
      }
    }
  }
}

TEST_CASE("affine equivalence") {
  Rng rng(33);
  for (int n : {1, 5, 8, 67}) {
    std::vector<float> a(static_cast<size_t>(n));
    for (auto& x : a) x = float(rng.uniform(-5, 5));
    std::vector<float> b = a;
    k::scalar_table().affine(a.data(), n, 1.25f, 3.5f);
    for (int i = 0; i < n; ++i) CHECK(a[size_t(i)] == (b[size_t(i)] - 1.25f) * 3.5f);
    if (k::avx2_supported()) {
      k::avx2_table()->affine(b.data(), n, 1.25f, 3.5f);
      CHECK(std::memcmp(a.data(), b.data(), size_t(n) * 4) == 0);
    }
  }
}

TEST_CASE("conv3x3_s2 matches an independent reference and is SIMD-invariant") {
  Rng rng(44);
  for (auto [cin, cout, h, w] : std::vector<std::array<int, 4>>{
           {1, 4, 8, 8}, {3, 2, 16, 12}, {2, 5, 64, 64}, {1, 1, 2, 2}}) {
    auto in = slack_buffer(size_t(cin) * h * w, &rng);
    std::vector<float> wt(size_t(cout) * cin * 9);
    std::vector<float> bias(static_cast<size_t>(cout));
    for (auto& x : wt) x = float(rng.uniform(-1, 1));
    for (auto& x : bias) x = float(rng.uniform(-1, 1));
    for (bool relu : {false, true}) {
      auto out_s = slack_buffer(size_t(cout) * (h / 2) * (w / 2));
      auto out_v = slack_buffer(size_t(cout) * (h / 2) * (w / 2));
      auto out_d = slack_buffer(size_t(cout) * (h / 2) * (w / 2));
      k::scalar_table().conv3x3_s2(in.data(), cin, h, w, wt.data(), bias.data(), out_s.data(),
                                   cout, relu);
      conv_ref_double(in.data(), cin, h, w, wt.data(), bias.data(), out_d.data(), cout, relu);
      size_t n_out = size_t(cout) * (h / 2) * (w / 2);
      for (size_t i = 0; i < n_out; ++i)
        CHECK(out_s[i] == doctest::Approx(out_d[i]).epsilon(1e-4));
      if (k::avx2_supported()) {
        k::avx2_table()->conv3x3_s2(in.data(), cin, h, w, wt.data(), bias.data(), out_v.data(),
                                    cout, relu);
        CHECK(std::memcmp(out_s.data(), out_v.data(), n_out * 4) == 0);
      }
    }
  }
}

TEST_CASE("carve_row semantics") {
  // One view looking straight down -x... use a synthetic camera-space setup:
  // the row advances along camera x; depth image is 4x4.
  const int w = 4, h = 4;
  std::vector<float> depth(size_t(w) * h, 10.0f);
  std::vector<uint8_t> mask(size_t(w) * h + 4, 1);
  mask[1] = 0;  // pixel (u=1, v=0) outside the mask

  k::CarveView view{};
  view.q0[0] = -1.5f;  // voxel k projects to u = k (fx=1, qz=1): q0x + k*1
  view.q0[1] = -1.5f;  // v = 0 row... qy/qz*fy + cy
  view.q0[2] = 1.0f;
  view.dq[0] = 1.0f;
  view.dq[1] = 0.0f;
  view.dq[2] = 0.0f;
  view.fx = view.fy = 1.0f;
  view.cx = 1.5f;  // u = qx + 1.5 -> k = 0 maps to u = 0
  view.cy = 1.5f;
  view.w = w;
  view.h = h;
  view.depth = depth.data();
  view.mask = mask.data();
  view.slack = 0.5f;

  // qz = 1, depth = 10 => qz < depth - slack => carved everywhere visible.
  uint64_t words[1] = {~0ull};
  k::scalar_table().carve_row(view, 6, words);
  // k = 0..3 project in-bounds (carved: in front of surface), k = 4,5 are
  // out of the image (carved too). All 6 bits cleared; bits 6+ untouched.
  CHECK(words[0] == (~0ull << 6));

  // Deep row: qz = 10 >= depth - slack => survives where masked.
  view.q0[2] = 10.0f;
  view.q0[1] = -15.0f;  // keep v = qy/qz*fy + cy = 0 row
  uint64_t words2[1] = {~0ull};
  k::scalar_table().carve_row(view, 6, words2);
  // u = qx/qz*fx + cx: qx = -1.5 + k... no longer integral mapping; compute
  // expected keeps directly with the same formula.
  uint64_t expect = ~0ull;
  for (int kk = 0; kk < 6; ++kk) {
    float qx = view.q0[0] + float(kk) * view.dq[0];
    float u = (qx / 10.0f) * 1.0f + 1.5f;
    float v = (view.q0[1] / 10.0f) * 1.0f + 1.5f;
    bool keep = false;
    if (u >= 0 && u < 4 && v >= 0 && v < 4) {
      int iu = int(std::floor(u)), iv = int(std::floor(v));
      keep = mask[size_t(iv * w + iu)] != 0;  // depth test passes at qz=10
    }
    if (!keep) expect &= ~(1ull << kk);
  }
  CHECK(words2[0] == expect);

  // No depth reading: a masked pixel with +inf depth never carves, so only the
  // unmasked pixel (k = 1) and the out-of-image voxels (k = 4, 5) are cleared.
  std::vector<float> nodepth(size_t(w) * h, std::numeric_limits<float>::infinity());
  view.q0[1] = -1.5f;
  view.q0[2] = 1.0f;
  view.depth = nodepth.data();
  uint64_t words3[1] = {~0ull};
  k::scalar_table().carve_row(view, 6, words3);
  CHECK(words3[0] == (~0ull & ~(1ull << 1) & ~(3ull << 4)));
}

TEST_CASE("carve_row scalar/avx2 equivalence on randomized views") {
  if (!k::avx2_supported()) return;
  Rng rng(55);
  for (int trial = 0; trial < 200; ++trial) {
    int w = 8 + rng.below_int(40), h = 8 + rng.below_int(40);
    std::vector<float> depth(size_t(w) * h);
    std::vector<uint8_t> mask(size_t(w) * h + 4, 0);
    for (size_t i = 0; i < depth.size(); ++i) {
      depth[i] = rng.uniform() < 0.1 ? std::numeric_limits<float>::infinity()
                                     : float(rng.uniform(0.5, 6.0));
      mask[i] = rng.uniform() < 0.7 ? 1 : 0;
    }
    k::CarveView view{};
    for (int i = 0; i < 3; ++i) {
      view.q0[i] = float(rng.uniform(-3, 3));
      view.dq[i] = float(rng.uniform(-0.1, 0.1));
    }
    view.fx = float(rng.uniform(20, 60));
    view.fy = float(rng.uniform(20, 60));
    view.cx = float(w) * 0.5f;
    view.cy = float(h) * 0.5f;
    view.w = w;
    view.h = h;
    view.depth = depth.data();
    view.mask = mask.data();
    view.slack = float(rng.uniform(0.0, 0.2));

    int n = 1 + rng.below_int(192);
    std::vector<uint64_t> w1((size_t(n) + 63) / 64, ~0ull), w2;
    w2 = w1;
    k::scalar_table().carve_row(view, n, w1.data());
    k::avx2_table()->carve_row(view, n, w2.data());
    CHECK(w1 == w2);
  }
}

TEST_CASE("simd mode dispatch") {
  CHECK(std::string(k::scalar_table().name) == "scalar");
  k::set_mode(k::SimdMode::scalar);
  CHECK(std::string(k::active().name) == "scalar");
  if (k::avx2_supported()) {
    k::set_mode(k::SimdMode::avx2);
    CHECK(std::string(k::active().name) == "avx2");
  } else {
    CHECK_THROWS_AS(k::set_mode(k::SimdMode::avx2), error);
  }
  k::set_mode_from_string("auto");
}
