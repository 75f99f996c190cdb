#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stackcount/render.h"
#include "stackcount/util.h"

namespace stackcount {

// Side length of the square depth crop the learned estimator consumes.
inline constexpr int kCropSize = 64;

enum class EstimatorId { mean, depth_extrapolated, depth_corrected, regressor };

const char* to_string(EstimatorId id);
EstimatorId estimator_from_string(const std::string& name);

struct OccupancyEstimate {
  double gamma = 0.0;  // in [0, 1]
  EstimatorId estimator_id = EstimatorId::mean;
};

// Constant predictor: the mean occupancy of the training set. Its R^2 on that
// same set is zero by construction. Empty input is an error.
double mean_estimator(const std::vector<double>& train_gamma);

// Normalized-depth estimate: mean over masked pixels of d_i / d_max, in
// (0, 1]. A pixel counts only when masked, finite and positive; no such pixel
// is an error. Common depth factors cancel per pixel, so the estimate is
// scale-invariant.
OccupancyEstimate depth_extrapolated(const DepthMap& depth, const Mask& mask);

// y = a*x + b fitted by ordinary least squares on (gamma_norm, gamma_gt)
// pairs; apply() clamps to [0, 1]. Fewer than two distinct abscissae is an
// error.
struct LinearCorrector {
  double a = 0.0, b = 0.0;

  double apply(double gamma_norm) const;
  OccupancyEstimate estimate(double gamma_norm) const;
};

LinearCorrector fit_depth_corrected(const std::vector<std::pair<double, double>>& pairs);

// Per-crop input normalization for the regressor: valid depths are min-max
// mapped to [0, 1] (a constant region maps to 0), invalid pixels are set to
// 1. The result holds kCropSize^2 floats plus the kernel tail slack. No valid
// pixel is an error.
std::vector<float> normalize_crop(const CropResult& crop);

// ---------------------------------------------------------------------------
// Learned occupancy regressor: a small conv net over the normalized crop,
//   conv3x3 stride-2 pad-1, channels 1 -> 16 -> 32 -> 64, ReLU after each,
//   global average pool, linear 64 -> 1, sigmoid.
// Everything is float32; 23361 parameters in total. Weight buffers carry the
// kernel tail slack so the runtime-selected conv kernel reads them directly.

struct RegressorParams {
  uint64_t seed = 0;
  std::vector<float> w1, b1;  // [16][1][3][3], [16]
  std::vector<float> w2, b2;  // [32][16][3][3], [32]
  std::vector<float> w3, b3;  // [64][32][3][3], [64]
  std::vector<float> lw, lb;  // [64], [1]

  // All-zero parameters (sigmoid(0) = 0.5 everywhere); the shape every other
  // constructor starts from.
  static RegressorParams zeros();
  // He-normal conv weights, slightly positive conv biases (so ReLU paths
  // start active), N(0, 1/64) linear weights, zero linear bias.
  static RegressorParams init(uint64_t seed);

  // Parameter blocks in canonical (file) order, with logical lengths.
  std::vector<std::pair<float*, size_t>> spans();
  std::vector<std::pair<const float*, size_t>> spans() const;
  size_t param_count() const;  // 23361
  float* flat(size_t index);   // canonical flattening across spans
  bool finite() const;
};

uint64_t regressor_arch_hash();

// Deterministic forward pass; output strictly inside (0, 1). Input is the
// normalized crop (at least kCropSize^2 floats); any non-finite value is an
// error.
OccupancyEstimate regressor_forward(const RegressorParams& p, const std::vector<float>& input);

struct TrainSample {
  std::vector<float> input;  // kCropSize^2 floats (normalized crop)
  float target = 0.0f;       // ground-truth occupancy
};

struct TrainHyper {
  double lr = 1e-2;
  int epochs = 50;
  int batch = 32;
  double momentum = 0.9;
  uint64_t seed = 1;
};

struct EpochStats {
  int epoch = 0;
  double train_mse = 0.0, val_mse = 0.0, val_r2 = 0.0;
};

struct TrainResult {
  RegressorParams params;  // best-on-validation snapshot
  std::vector<EpochStats> log;
  int best_epoch = 0;
  double best_val_mse = 0.0;
  double initial_mse = 0.0;  // train MSE at initialization
};

// Mini-batch SGD with momentum and a cosine-decayed learning rate on the
// mean squared error. The shuffle is seeded per epoch and gradients are
// accumulated in sample order, so a fixed seed reproduces bit-identical
// weights. The best-on-validation snapshot is returned (its loss is monotone
// over checkpoints by construction). A train loss above ten times the initial
// loss aborts with diagnostics. csv_path, when nonempty, receives the loss
// log (epoch, train_mse, val_mse, val_r2).
TrainResult train_regressor(const std::vector<TrainSample>& train,
                            const std::vector<TrainSample>& val, const TrainHyper& hyper,
                            const std::string& csv_path = {});

// Backprop verification: compares analytic gradients of the squared error
// against central finite differences (h = 1e-3 in float32) at n_weights
// randomly chosen parameters. Differences are measured relative to the
// gradient's own magnitude, max(max_i |g_i|, 1e-6) — float32 differences of
// near-zero components carry no usable signal on their own. Returns the
// largest relative error seen.
double gradient_check(const RegressorParams& p, const std::vector<float>& input, float target,
                      uint64_t seed, int n_weights = 128);

// Versioned parameter file: magic "OCC1", version, architecture hash, seed,
// count, little-endian float32 blob, trailing CRC32 of everything before it.
void save_regressor(const std::string& path, const RegressorParams& p);
RegressorParams load_regressor(const std::string& path);

// ---------------------------------------------------------------------------
// Container wall thickness from the container mask.

struct ThicknessEstimate {
  double t_ratio = 0.0;  // in [0, 0.5)
  int directions = 0;    // scanline directions that saw a wall on both sides
};

// Scanlines through the container-mask centroid at 8 equally spaced angles
// each measure (outer span - inner cavity span) / 2 / outer span, where the
// spans come from the nearest container run on either side of the centroid;
// the median over usable directions is returned, clamped to [0, 0.5). A mask
// with no cavity (empty, or container at the centroid with no gap) is an
// error. The object mask and depth are accepted for interface symmetry with
// the other estimators; the geometry needs only the container mask.
ThicknessEstimate estimate_thickness(const Mask& container, const Mask& objects,
                                     const DepthMap& depth);

}  // namespace stackcount
