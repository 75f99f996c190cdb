#include <algorithm>
#include <cmath>

#include "stackcount/pipeline.h"

namespace stackcount {
namespace {

// Half-to-even rounding, independent of the ambient FP rounding mode.
long long round_half_even(double x) {
  double f = std::floor(x);
  double frac = x - f;
  if (frac > 0.5 || (frac == 0.5 && std::fmod(f, 2.0) != 0.0)) f += 1.0;
  return static_cast<long long>(f);
}

void check_pairs(const std::vector<std::pair<double, double>>& pairs, bool need_positive_truth) {
  if (pairs.empty()) fail(errc::numeric, "metric needs at least one (truth, estimate) pair");
  for (const auto& [y, e] : pairs) {
    if (!std::isfinite(y) || !std::isfinite(e)) fail(errc::numeric, "metric input is not finite");
    if (need_positive_truth && !(y > 0))
      fail(errc::numeric, "normalized metric needs strictly positive ground truth");
  }
}

}  // namespace

CountResult count_objects(double gamma, double volume, double unit_volume) {
  if (!std::isfinite(gamma) || !std::isfinite(volume) || !std::isfinite(unit_volume))
    fail(errc::numeric, "count inputs must be finite");
  if (!(unit_volume > 0)) fail(errc::numeric, "unit volume must be positive");
  if (!(volume >= 0)) fail(errc::numeric, "volume must be non-negative");
  if (!(gamma >= 0 && gamma <= 1)) fail(errc::numeric, "occupancy ratio out of [0, 1]");

  CountResult r;
  r.gamma_used = gamma;
  r.volume_used = volume;
  r.unit_volume_used = unit_volume;
  r.n_est = gamma * volume / unit_volume;
  r.n_rounded = round_half_even(r.n_est);
  return r;
}

double metric_nae(const std::vector<std::pair<double, double>>& pairs) {
  check_pairs(pairs, true);
  double abs_sum = 0, truth_sum = 0;
  for (const auto& [y, e] : pairs) {
    abs_sum += std::fabs(y - e);
    truth_sum += y;
  }
  return abs_sum / truth_sum;
}

double metric_sre(const std::vector<std::pair<double, double>>& pairs) {
  check_pairs(pairs, true);
  double sq_sum = 0, truth_sq = 0;
  for (const auto& [y, e] : pairs) {
    sq_sum += (y - e) * (y - e);
    truth_sq += y * y;
  }
  return sq_sum / truth_sq;
}

double metric_mae(const std::vector<std::pair<double, double>>& pairs) {
  check_pairs(pairs, false);
  double abs_sum = 0;
  for (const auto& [y, e] : pairs) abs_sum += std::fabs(y - e);
  return abs_sum / double(pairs.size());
}

double metric_smape(const std::vector<std::pair<double, double>>& pairs) {
  check_pairs(pairs, true);
  // Percent scale applied per term, before the division, so round decimal
  // inputs produce round percentages.
  double term_sum = 0;
  for (const auto& [y, e] : pairs) term_sum += 200.0 * std::fabs(y - e) / (std::fabs(y) + std::fabs(e));
  return term_sum / double(pairs.size());
}

double metric_r2(const std::vector<std::pair<double, double>>& pairs) {
  check_pairs(pairs, false);
  if (pairs.size() < 2) fail(errc::numeric, "coefficient of determination needs at least two pairs");
  double mean = 0;
  for (const auto& [y, e] : pairs) mean += y;
  mean /= double(pairs.size());
  double ss_tot = 0, ss_res = 0;
  for (const auto& [y, e] : pairs) {
    ss_tot += (y - mean) * (y - mean);
    ss_res += (y - e) * (y - e);
  }
  if (!(ss_tot > 0)) fail(errc::numeric, "ground truth has zero variance");
  return 1.0 - ss_res / ss_tot;
}

MetricsReport report_from_rows(EstimatorId id, std::vector<SceneRow> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const SceneRow& a, const SceneRow& b) { return a.scene_id < b.scene_id; });
  std::vector<std::pair<double, double>> counts, gammas;
  counts.reserve(rows.size());
  gammas.reserve(rows.size());
  for (const SceneRow& r : rows) {
    counts.emplace_back(double(r.n_gt), double(r.n_rounded));
    gammas.emplace_back(r.gamma_gt, r.gamma_est);
  }
  MetricsReport rep;
  rep.estimator_id = id;
  rep.n_scenes = int(rows.size());
  rep.nae = metric_nae(counts);
  rep.sre = metric_sre(counts);
  rep.mae = metric_mae(counts);
  rep.smape = metric_smape(counts);
  rep.r2 = metric_r2(gammas);
  rep.rows = std::move(rows);
  return rep;
}

}  // namespace stackcount
