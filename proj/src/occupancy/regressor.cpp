#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "stackcount/kernels.h"
#include "stackcount/occupancy.h"

namespace stackcount {
namespace {

constexpr double kPi = 3.14159265358979323846;

// conv3x3 stride-2 pad-1 stack: 1x64x64 -> 16x32x32 -> 32x16x16 -> 64x8x8.
constexpr int kC1 = 16, kC2 = 32, kC3 = 64;
constexpr int kH0 = kCropSize, kH1 = 32, kH2 = 16, kH3 = 8;
constexpr size_t kW1n = size_t(kC1) * 1 * 9, kW2n = size_t(kC2) * kC1 * 9,
                 kW3n = size_t(kC3) * kC2 * 9;
constexpr size_t kSlack = 8;  // float tail slack required by the conv kernels

std::vector<float> buf(size_t n) { return std::vector<float>(n + kSlack, 0.0f); }

struct Activations {
  std::vector<float> x0 = buf(size_t(kH0) * kH0);
  std::vector<float> a1 = buf(size_t(kC1) * kH1 * kH1);
  std::vector<float> a2 = buf(size_t(kC2) * kH2 * kH2);
  std::vector<float> a3 = buf(size_t(kC3) * kH3 * kH3);
  float gap[kC3] = {};
  float y = 0.0f;
};

float forward(const RegressorParams& p, const float* in, Activations& act) {
  std::memcpy(act.x0.data(), in, sizeof(float) * kH0 * kH0);
  const auto& k = kernels::active();
  k.conv3x3_s2(act.x0.data(), 1, kH0, kH0, p.w1.data(), p.b1.data(), act.a1.data(), kC1, true);
  k.conv3x3_s2(act.a1.data(), kC1, kH1, kH1, p.w2.data(), p.b2.data(), act.a2.data(), kC2, true);
  k.conv3x3_s2(act.a2.data(), kC2, kH2, kH2, p.w3.data(), p.b3.data(), act.a3.data(), kC3, true);
  for (int c = 0; c < kC3; ++c) {
    float s = 0.0f;
    const float* a = act.a3.data() + size_t(c) * kH3 * kH3;
    for (int i = 0; i < kH3 * kH3; ++i) s += a[i];
    act.gap[c] = s * (1.0f / (kH3 * kH3));
  }
  float z = p.lb[0];
  for (int c = 0; c < kC3; ++c) z += p.lw[c] * act.gap[c];
  // Sigmoid in double, then pinned strictly inside (0, 1): float32 rounding
  // alone would saturate to exactly 1 around z ~ 17.
  float y = float(1.0 / (1.0 + std::exp(-double(z))));
  y = std::min(y, std::nextafterf(1.0f, 0.0f));
  y = std::max(y, std::nextafterf(0.0f, 1.0f));
  act.y = y;
  return y;
}

// Gradient of one stride-2 conv w.r.t. weights, biases and (optionally) its
// input. `post` is the layer's post-ReLU output: a zero there blocks the
// gradient, which matches a forward ReLU regardless of which side of the kink
// produced the zero. din must be zeroed by the caller; dw/db accumulate.
void conv_backward(const float* in, int c_in, int h, int w, const float* wgt, int c_out,
                   const float* post, const float* dout, float* din, float* dw, float* db) {
  int h2 = h / 2, w2 = w / 2;
  for (int oc = 0; oc < c_out; ++oc) {
    for (int oy = 0; oy < h2; ++oy) {
      for (int ox = 0; ox < w2; ++ox) {
        size_t oi = (size_t(oc) * h2 + oy) * w2 + ox;
        if (post[oi] <= 0.0f) continue;
        float g = dout[oi];
        db[oc] += g;
        for (int ic = 0; ic < c_in; ++ic) {
          const float* ip = in + size_t(ic) * h * w;
          float* dip = din ? din + size_t(ic) * h * w : nullptr;
          size_t wo = (size_t(oc) * c_in + ic) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            int iy = 2 * oy + ky - 1;
            if (unsigned(iy) >= unsigned(h)) continue;
            for (int kx = 0; kx < 3; ++kx) {
              int ix = 2 * ox + kx - 1;
              if (unsigned(ix) >= unsigned(w)) continue;
              size_t ii = size_t(iy) * w + ix;
              dw[wo + size_t(ky) * 3 + kx] += g * ip[ii];
              if (dip) dip[ii] += g * wgt[wo + size_t(ky) * 3 + kx];
            }
          }
        }
      }
    }
  }
}

struct BackBuffers {
  std::vector<float> da1 = std::vector<float>(size_t(kC1) * kH1 * kH1);
  std::vector<float> da2 = std::vector<float>(size_t(kC2) * kH2 * kH2);
  std::vector<float> da3 = std::vector<float>(size_t(kC3) * kH3 * kH3);
};

// Accumulates d(dLdy * loss path)/d(params) into g for one sample.
void backward(const RegressorParams& p, const Activations& act, float dLdy, RegressorParams& g,
              BackBuffers& bb) {
  float dz = dLdy * act.y * (1.0f - act.y);
  g.lb[0] += dz;
  float dgap[kC3];
  for (int c = 0; c < kC3; ++c) {
    g.lw[c] += dz * act.gap[c];
    dgap[c] = dz * p.lw[c];
  }
  for (int c = 0; c < kC3; ++c) {
    float d = dgap[c] * (1.0f / (kH3 * kH3));
    float* p3 = bb.da3.data() + size_t(c) * kH3 * kH3;
    for (int i = 0; i < kH3 * kH3; ++i) p3[i] = d;
  }
  std::fill(bb.da2.begin(), bb.da2.end(), 0.0f);
  conv_backward(act.a2.data(), kC2, kH2, kH2, p.w3.data(), kC3, act.a3.data(), bb.da3.data(),
                bb.da2.data(), g.w3.data(), g.b3.data());
  std::fill(bb.da1.begin(), bb.da1.end(), 0.0f);
  conv_backward(act.a1.data(), kC1, kH1, kH1, p.w2.data(), kC2, act.a2.data(), bb.da2.data(),
                bb.da1.data(), g.w2.data(), g.b2.data());
  conv_backward(act.x0.data(), 1, kH0, kH0, p.w1.data(), kC1, act.a1.data(), bb.da1.data(),
                nullptr, g.w1.data(), g.b1.data());
}

const float* checked_input(const std::vector<float>& input) {
  if (input.size() < size_t(kCropSize) * kCropSize)
    fail(errc::config, "regressor input smaller than a crop");
  for (int i = 0; i < kCropSize * kCropSize; ++i)
    if (!std::isfinite(input[i])) fail(errc::numeric, "regressor input not finite");
  return input.data();
}

double mse_over(const RegressorParams& p, const std::vector<TrainSample>& set, Activations& act) {
  double sq = 0.0;
  for (const auto& s : set) {
    double d = double(forward(p, s.input.data(), act)) - double(s.target);
    sq += d * d;
  }
  return sq / double(set.size());
}

}  // namespace

RegressorParams RegressorParams::zeros() {
  RegressorParams p;
  p.w1 = buf(kW1n);
  p.b1 = buf(kC1);
  p.w2 = buf(kW2n);
  p.b2 = buf(kC2);
  p.w3 = buf(kW3n);
  p.b3 = buf(kC3);
  p.lw = buf(kC3);
  p.lb = buf(1);
  return p;
}

RegressorParams RegressorParams::init(uint64_t seed) {
  RegressorParams p = zeros();
  p.seed = seed;
  Rng rng(Rng::stream(seed, 0x6f636331));  // "occ1"
  auto he = [&](std::vector<float>& w, size_t n, int fan_in) {
    double sd = std::sqrt(2.0 / double(fan_in));
    for (size_t i = 0; i < n; ++i) w[i] = float(rng.normal() * sd);
  };
  he(p.w1, kW1n, 1 * 9);
  he(p.w2, kW2n, kC1 * 9);
  he(p.w3, kW3n, kC2 * 9);
  // Slightly positive biases keep every ReLU path initially active, so even a
  // zero crop produces usable gradients.
  auto bias = [&](std::vector<float>& b, size_t n) {
    for (size_t i = 0; i < n; ++i) b[i] = float(rng.uniform(0.01, 0.05));
  };
  bias(p.b1, kC1);
  bias(p.b2, kC2);
  bias(p.b3, kC3);
  double sd = std::sqrt(1.0 / double(kC3));
  for (int i = 0; i < kC3; ++i) p.lw[i] = float(rng.normal() * sd);
  p.lb[0] = 0.0f;
  return p;
}

std::vector<std::pair<float*, size_t>> RegressorParams::spans() {
  return {{w1.data(), kW1n}, {b1.data(), size_t(kC1)}, {w2.data(), kW2n},
          {b2.data(), size_t(kC2)}, {w3.data(), kW3n}, {b3.data(), size_t(kC3)},
          {lw.data(), size_t(kC3)}, {lb.data(), size_t(1)}};
}

std::vector<std::pair<const float*, size_t>> RegressorParams::spans() const {
  return {{w1.data(), kW1n}, {b1.data(), size_t(kC1)}, {w2.data(), kW2n},
          {b2.data(), size_t(kC2)}, {w3.data(), kW3n}, {b3.data(), size_t(kC3)},
          {lw.data(), size_t(kC3)}, {lb.data(), size_t(1)}};
}

size_t RegressorParams::param_count() const {
  size_t n = 0;
  for (auto [ptr, len] : spans()) n += len;
  return n;
}

float* RegressorParams::flat(size_t index) {
  for (auto [ptr, len] : spans()) {
    if (index < len) return ptr + index;
    index -= len;
  }
  fail(errc::config, "parameter index out of range");
}

bool RegressorParams::finite() const {
  for (auto [ptr, len] : spans())
    for (size_t i = 0; i < len; ++i)
      if (!std::isfinite(ptr[i])) return false;
  return true;
}

uint64_t regressor_arch_hash() {
  return fnv1a64("occ-regressor:conv3x3s2p1:1-16-32-64,gap,linear64-1,sigmoid,in64x64,v1");
}

OccupancyEstimate regressor_forward(const RegressorParams& p, const std::vector<float>& input) {
  Activations act;
  float y = forward(p, checked_input(input), act);
  return {double(y), EstimatorId::regressor};
}

TrainResult train_regressor(const std::vector<TrainSample>& train,
                            const std::vector<TrainSample>& val, const TrainHyper& hyper,
                            const std::string& csv_path) {
  if (train.empty() || val.empty()) fail(errc::config, "training needs nonempty train and val sets");
  if (hyper.epochs < 1 || hyper.batch < 1 || !(hyper.lr > 0.0))
    fail(errc::config, "bad training hyperparameters");
  for (const auto* set : {&train, &val})
    for (const auto& s : *set) checked_input(s.input);

  RegressorParams p = RegressorParams::init(hyper.seed);
  RegressorParams vel = RegressorParams::zeros();
  RegressorParams grad = RegressorParams::zeros();
  Activations act;
  BackBuffers bb;

  TrainResult res;
  res.initial_mse = mse_over(p, train, act);
  double divergence_bound = 10.0 * std::max(res.initial_mse, 1e-12);
  res.best_val_mse = std::numeric_limits<double>::infinity();

  double val_mean = 0.0;
  for (const auto& s : val) val_mean += s.target;
  val_mean /= double(val.size());
  double val_sstot = 0.0;
  for (const auto& s : val) val_sstot += (double(s.target) - val_mean) * (double(s.target) - val_mean);

  std::string csv = "epoch,train_mse,val_mse,val_r2\n";
  auto flush_csv = [&] {
    if (!csv_path.empty()) write_file(csv_path, csv);
  };

  std::vector<size_t> order(train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  int n = int(train.size());
  for (int e = 0; e < hyper.epochs; ++e) {
    double lr = hyper.lr * 0.5 * (1.0 + std::cos(kPi * double(e) / double(hyper.epochs)));
    Rng rng(Rng::stream(hyper.seed, 0x45504f00u + uint64_t(e)));
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double ep_sq = 0.0;
    for (int b0 = 0; b0 < n; b0 += hyper.batch) {
      int bs = std::min(hyper.batch, n - b0);
      for (auto [ptr, len] : grad.spans()) std::fill(ptr, ptr + len, 0.0f);
      for (int j = 0; j < bs; ++j) {
        const TrainSample& s = train[order[size_t(b0) + j]];
        float y = forward(p, s.input.data(), act);
        double d = double(y) - double(s.target);
        ep_sq += d * d;
        backward(p, act, float(2.0 * d / double(bs)), grad, bb);
      }
      auto ps = p.spans();
      auto vs = vel.spans();
      auto gs = grad.spans();
      for (size_t k = 0; k < ps.size(); ++k) {
        float* w = ps[k].first;
        float* v = vs[k].first;
        const float* g = gs[k].first;
        for (size_t i = 0; i < ps[k].second; ++i) {
          v[i] = float(hyper.momentum) * v[i] - float(lr) * g[i];
          w[i] += v[i];
        }
      }
    }

    double train_mse = ep_sq / double(n);
    double val_sq = 0.0;
    for (const auto& s : val) {
      double d = double(forward(p, s.input.data(), act)) - double(s.target);
      val_sq += d * d;
    }
    double val_mse = val_sq / double(val.size());
    double val_r2 = val_sstot > 0.0 ? 1.0 - val_sq / val_sstot : 0.0;
    res.log.push_back({e + 1, train_mse, val_mse, val_r2});
    csv += std::to_string(e + 1) + "," + format_double(train_mse) + "," + format_double(val_mse) +
           "," + format_double(val_r2) + "\n";

    if (val_mse < res.best_val_mse) {
      res.best_val_mse = val_mse;
      res.best_epoch = e + 1;
      res.params = p;
    }
    if (!(train_mse <= divergence_bound) || !p.finite()) {
      flush_csv();
      fail(errc::numeric, "training diverged at epoch " + std::to_string(e + 1) + ": train mse " +
                              format_double(train_mse) + " vs initial " +
                              format_double(res.initial_mse));
    }
  }
  flush_csv();
  return res;
}

double gradient_check(const RegressorParams& p, const std::vector<float>& input, float target,
                      uint64_t seed, int n_weights) {
  const float* in = checked_input(input);
  if (n_weights < 1) fail(errc::config, "gradient check needs at least one weight");

  Activations act;
  BackBuffers bb;
  RegressorParams grad = RegressorParams::zeros();
  float y = forward(p, in, act);
  backward(p, act, 2.0f * (y - target), grad, bb);

  double scale = 0.0;
  for (auto [ptr, len] : grad.spans())
    for (size_t i = 0; i < len; ++i) scale = std::max(scale, double(std::fabs(ptr[i])));
  double denom = std::max(scale, 1e-6);

  RegressorParams work = p;
  size_t total = p.param_count();
  Rng rng(seed);
  const float h = 1e-3f;
  double worst = 0.0;
  for (int c = 0; c < n_weights; ++c) {
    size_t idx = size_t(rng.below(total));
    float* w = work.flat(idx);
    float orig = *w;
    float wp = orig + h, wm = orig - h;
    *w = wp;
    double dp = double(forward(work, in, act)) - double(target);
    *w = wm;
    double dm = double(forward(work, in, act)) - double(target);
    *w = orig;
    double gn = (dp * dp - dm * dm) / (double(wp) - double(wm));
    double ga = double(*grad.flat(idx));
    worst = std::max(worst, std::fabs(ga - gn) / denom);
  }
  return worst;
}

}  // namespace stackcount
