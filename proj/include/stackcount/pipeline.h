#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stackcount/occupancy.h"

namespace stackcount {

// --------------------------------------------------------------------------
// Counting rule: N = gamma * volume / unit_volume.

struct CountResult {
  double n_est = 0.0;      // real-valued estimate, gamma * volume / unit_volume
  long long n_rounded = 0; // half-to-even rounding of n_est; never negative
  double gamma_used = 0.0;
  double volume_used = 0.0;
  double unit_volume_used = 0.0;
  EstimatorId estimator_id = EstimatorId::mean;
  std::string scene_id;
};

// Requires unit_volume > 0, volume >= 0 and gamma in [0, 1]. The integer
// count rounds halves to even regardless of the ambient FP rounding mode.
// Exactly 1-homogeneous: scaling volume and unit_volume together changes
// nothing.
CountResult count_objects(double gamma, double volume, double unit_volume);

// --------------------------------------------------------------------------
// Count-accuracy metrics over (truth, estimate) pairs. The normalized and
// symmetric metrics require every truth strictly positive; all require at
// least one pair.

double metric_nae(const std::vector<std::pair<double, double>>& pairs);  // sum|y-e| / sum y
double metric_sre(const std::vector<std::pair<double, double>>& pairs);  // sum(y-e)^2 / sum y^2
double metric_mae(const std::vector<std::pair<double, double>>& pairs);  // mean |y-e|
double metric_smape(const std::vector<std::pair<double, double>>& pairs); // percent

// 1 - SS_res/SS_tot; needs >= 2 pairs and nonzero variance in the truths.
// Negative values are legal (worse than predicting the mean).
double metric_r2(const std::vector<std::pair<double, double>>& pairs);

// --------------------------------------------------------------------------
// Per-scene evaluation rows and their aggregate report. Aggregates are a
// deterministic fold over scene-id-sorted rows, so regenerating a report from
// its rows is bit-exact and input order never matters.

struct SceneRow {
  std::string scene_id;
  std::string shape_id;
  int n_gt = 0;
  double gamma_gt = 0.0;
  double gamma_est = 0.0;
  double n_est = 0.0;
  long long n_rounded = 0;
  double volume_est = 0.0;
  double unit_volume = 0.0;
  double complexity = 0.0;  // shape complexity score against the dataset normalizer
};

struct MetricsReport {
  EstimatorId estimator_id = EstimatorId::mean;
  int n_scenes = 0;
  double nae = 0.0, sre = 0.0, mae = 0.0, smape = 0.0;  // on rounded counts
  double r2 = 0.0;                                      // on occupancy ratios
  std::vector<SceneRow> rows;                           // scene-id-sorted
};

MetricsReport report_from_rows(EstimatorId id, std::vector<SceneRow> rows);

// --------------------------------------------------------------------------
// Whole-scene counting from a scene directory written by the dataset
// generator with all views saved (manifest.json, cameras.json and per-view
// depth/mask files). Missing artifacts are all enumerated in one error.

// Fitted non-learned estimators, stored as JSON next to the regressor
// weights by train_pipeline.
struct TrainedEstimators {
  double mean_gamma = 0.0;     // training-set mean occupancy
  LinearCorrector corrector;   // fitted on (normalized-depth, truth) pairs
};

void save_estimators(const std::string& path, const TrainedEstimators& e);
TrainedEstimators load_estimators(const std::string& path);

struct PipelineConfig {
  int carve_resolution = 128;
  // Directory holding params.occ1 / estimators.json; consulted only for the
  // estimators that need it.
  std::string model_dir;
  // Ground-truth injection points; each bypasses its estimation stage.
  std::optional<double> gamma_override;
  std::optional<double> volume_override;
  std::optional<double> unit_volume_override;
  std::optional<double> thickness_override;
  // Write result.json and carved.vox into <scene>/pipeline for audit.
  bool persist = true;
};

// Key-view selection -> occupancy estimation -> carving -> rim erosion ->
// counting rule. A scene with no object pixels in any view counts zero. The
// carved grid and the (gamma, volume, unit volume, count) decomposition are
// persisted per scene unless disabled.
CountResult run_scene(const std::string& scene_dir, EstimatorId estimator,
                      const PipelineConfig& config = {});

// --------------------------------------------------------------------------
// Training over a generated dataset: regressor weights plus the fitted
// baseline estimators, written into out_dir (params.occ1, estimators.json,
// train_log.csv).

struct TrainOptions {
  TrainHyper hyper;
  std::string out_dir;
  // Flat-packed calibration scenes mixed into the training samples so the
  // estimator also sees the dense upper end of the occupancy range; < 0
  // picks one per eight training scenes (at least 16).
  int calibration_scenes = -1;
};

struct TrainSummary {
  int n_train = 0, n_val = 0, n_calibration = 0;
  int best_epoch = 0;
  double best_val_mse = 0.0;
  double mean_gamma = 0.0;
  std::string params_path;
  uint32_t params_crc = 0;  // CRC32 of the written weight file
};

TrainSummary train_pipeline(const std::string& dataset_dir, const TrainOptions& options);

// --------------------------------------------------------------------------
// Held-out evaluation: per-estimator metric reports over the validation
// split, with scene volumes carved from views re-rendered off each scene's
// manifest. Aborts if train and validation share a shape.

struct ComplexityBin {
  double lo = 0.0, hi = 0.0;          // bin edges over the complexity score
  int count = 0;                      // scenes in the bin
  double mean_abs_gamma_error = 0.0;  // 0 for empty bins
};

struct EvaluateOptions {
  std::vector<EstimatorId> estimators{EstimatorId::mean, EstimatorId::depth_extrapolated,
                                      EstimatorId::depth_corrected, EstimatorId::regressor};
  int carve_resolution = 128;
  std::string model_dir;  // required when the learned estimator is evaluated
  std::string out_dir;    // when nonempty: per-estimator CSV + JSON, summary.json
  bool scatter_svg = false;  // also emit complexity-vs-error scatter plots
};

struct EvaluateResult {
  std::vector<MetricsReport> reports;  // one per requested estimator, same order
  std::vector<std::array<ComplexityBin, 10>> complexity;  // equal-width bins, per estimator
};

EvaluateResult evaluate(const std::string& dataset_dir, const EvaluateOptions& options);

// --------------------------------------------------------------------------
// Depth-source study: retrains and re-evaluates the learned estimator with
// the key-view depth optionally degraded (multiplicative noise plus Gaussian
// blur) on either side, yielding the 2x2 clean/degraded grid. Scene volumes
// are injected from ground truth so the grid isolates occupancy error.

struct DepthDegrade {
  double noise_rel = 0.0;    // sigma of per-pixel multiplicative Gaussian noise
  double blur_sigma_px = 0.0;  // Gaussian blur radius in pixels
  uint64_t seed = 0;
};

struct AblationOptions {
  DepthDegrade degrade;
  TrainHyper hyper;
  std::string out_dir;  // when nonempty: ablation.json with the labeled grid
};

struct AblationCell {
  bool degraded_train = false;
  bool degraded_eval = false;
  MetricsReport report;
};

struct AblationResult {
  std::array<AblationCell, 4> cells;  // (train, eval) in {clean, degraded}^2
};

AblationResult depth_source_ablation(const std::string& dataset_dir,
                                     const AblationOptions& options);

// --------------------------------------------------------------------------
// Container-border effect: dataset means of the occupancy ratio measured over
// the full interior slab versus the centered half-size core.

struct BorderReport {
  int n_scenes = 0;
  double mean_gamma_with = 0.0;  // slab measure, wall-adjacent cells included
  double mean_gamma_no = 0.0;    // half-size core, border region excluded
  double delta = 0.0;            // |with - no|
};

BorderReport border_report(const std::string& dataset_dir);

}  // namespace stackcount
