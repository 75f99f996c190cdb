#include <algorithm>
#include <cmath>

#include "stackcount/kernels.h"
#include "stackcount/occupancy.h"

namespace stackcount {

const char* to_string(EstimatorId id) {
  switch (id) {
    case EstimatorId::mean: return "mean";
    case EstimatorId::depth_extrapolated: return "depth_extrapolated";
    case EstimatorId::depth_corrected: return "depth_corrected";
    case EstimatorId::regressor: return "regressor";
  }
  fail(errc::config, "invalid estimator id");
}

EstimatorId estimator_from_string(const std::string& name) {
  if (name == "mean") return EstimatorId::mean;
  if (name == "depth_extrapolated") return EstimatorId::depth_extrapolated;
  if (name == "depth_corrected") return EstimatorId::depth_corrected;
  if (name == "regressor") return EstimatorId::regressor;
  fail(errc::config, "unknown estimator: " + name);
}

double mean_estimator(const std::vector<double>& train_gamma) {
  if (train_gamma.empty()) fail(errc::config, "mean estimator needs a nonempty training set");
  double sum = 0.0;
  for (double g : train_gamma) sum += g;
  return sum / double(train_gamma.size());
}

OccupancyEstimate depth_extrapolated(const DepthMap& depth, const Mask& mask) {
  if (depth.width != mask.width || depth.height != mask.height)
    fail(errc::config, "depth/mask size mismatch");
  size_t n = depth.depths.size();
  float dmax = 0.0f;
  int64_t k = 0;
  for (size_t i = 0; i < n; ++i) {
    float d = depth.depths[i];
    if (!mask.bits[i] || !std::isfinite(d) || d <= 0.0f) continue;
    dmax = std::max(dmax, d);
    ++k;
  }
  if (k == 0) fail(errc::generation, "no valid masked depth pixel");
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    float d = depth.depths[i];
    if (!mask.bits[i] || !std::isfinite(d) || d <= 0.0f) continue;
    sum += double(d) / double(dmax);
  }
  return {sum / double(k), EstimatorId::depth_extrapolated};
}

double LinearCorrector::apply(double gamma_norm) const {
  return std::clamp(a * gamma_norm + b, 0.0, 1.0);
}

OccupancyEstimate LinearCorrector::estimate(double gamma_norm) const {
  return {apply(gamma_norm), EstimatorId::depth_corrected};
}

LinearCorrector fit_depth_corrected(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 2) fail(errc::config, "corrector fit needs at least two points");
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : pairs) {
    mx += x;
    my += y;
  }
  mx /= double(pairs.size());
  my /= double(pairs.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : pairs) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx <= 0.0) fail(errc::config, "corrector fit needs at least two distinct abscissae");
  LinearCorrector c;
  c.a = sxy / sxx;
  c.b = my - c.a * mx;
  if (!std::isfinite(c.a) || !std::isfinite(c.b)) fail(errc::numeric, "corrector fit not finite");
  return c;
}

std::vector<float> normalize_crop(const CropResult& crop) {
  if (crop.depth.width != crop.valid.width || crop.depth.height != crop.valid.height)
    fail(errc::config, "crop depth/valid size mismatch");
  int n = crop.depth.width * crop.depth.height;
  std::vector<float> out(size_t(n) + 8, 0.0f);  // conv kernels read 8 floats of tail slack
  std::copy(crop.depth.depths.begin(), crop.depth.depths.end(), out.begin());

  float mn = 0.0f, mx = 0.0f;
  int valid = kernels::active().minmax_masked(out.data(), crop.valid.bits.data(), n, &mn, &mx);
  if (valid == 0) fail(errc::generation, "crop has no valid pixel");
  if (!std::isfinite(mn) || !std::isfinite(mx)) fail(errc::numeric, "crop depths not finite");

  float range = mx - mn;
  kernels::active().affine(out.data(), n, mn, range > 0.0f ? 1.0f / range : 0.0f);
  for (int i = 0; i < n; ++i)
    out[i] = crop.valid.bits[i] ? std::clamp(out[i], 0.0f, 1.0f) : 1.0f;
  return out;
}

}  // namespace stackcount
