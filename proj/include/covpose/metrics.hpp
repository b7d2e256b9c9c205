#ifndef COVPOSE_METRICS_HPP
#define COVPOSE_METRICS_HPP

#include "covpose/common.hpp"
#include "covpose/pose_codec.hpp"
#include "covpose/spd_layers.hpp"
#include "covpose/synthetic.hpp"

#include <functional>
#include <string>
#include <vector>

namespace covpose {

/// Mean distance between model points under the predicted and ground-truth
/// poses.
double add_metric(const std::vector<Vec3>& points, const PoseSE3& pose_hat,
                  const PoseSE3& pose_gt);

/// Symmetric variant: nearest-neighbor matching instead of index matching.
double adds_metric(const std::vector<Vec3>& points, const PoseSE3& pose_hat,
                   const PoseSE3& pose_gt);

/// Fraction of per-sample errors below 10% of the object diameter.
double add_accuracy(const std::vector<double>& errors, double diameter);

/// Area under the accuracy-vs-threshold curve on [0, max_threshold],
/// normalized to [0, 1]; the exact integral of the empirical CDF.
double auc_add(const std::vector<double>& errors, double max_threshold = 0.10);

struct PerSampleMetrics {
  int id = 0;
  double add = 0.0;
  double adds = 0.0;
  double rotation_error_deg = 0.0;
  double translation_error_m = 0.0;
};

struct MetricReport {
  std::vector<PerSampleMetrics> samples;
  double add_mean = 0.0;
  double adds_mean = 0.0;
  double add_accuracy = 0.0;
  double auc_add = 0.0;
  double median_rotation_error_deg = 0.0;
  double median_translation_error_m = 0.0;
};

MetricReport build_metric_report(const std::vector<PerSampleMetrics>& samples,
                                 double diameter,
                                 double auc_max_threshold = 0.10);

void write_metric_report_csv(const MetricReport& report,
                             const std::string& path);

double median(std::vector<double> values);

struct CorrelationBin {
  double center = 0.0;
  double mean_cov_dist = 0.0;
  double mean_cosine_dist = 0.0;
  double mean_euclid_dist = 0.0;
  long long count = 0;
};

struct CorrelationCurve {
  std::vector<CorrelationBin> bins;
  double spearman_cov = 0.0;
  double spearman_cosine = 0.0;
  double spearman_euclid = 0.0;
};

/// Spearman rank correlation with tie-averaged ranks. Returns 0 when either
/// sequence is constant (correlation undefined).
double spearman_rank_correlation(const std::vector<double>& a,
                                 const std::vector<double>& b);

/// Feature extractor used by the correlation analysis: maps a sample image
/// to a feature map (typically the untrained backbone).
using FeatureFn = std::function<FeatureMap(const Mat& image)>;

struct CorrelationConfig {
  int n_pairs = 20000;
  int n_bins = 10;
  std::uint64_t seed = 99;
  double eps_reeig = 1e-4;
  double pose_distance_scale = 1.0;  // se3_distance translation scale
};

/// Samples random pairs, measures SE(3) pose distance against the
/// Log-Euclidean distance of pooled covariances, plus cosine and Euclidean
/// distances of flattened features, bins by pose distance, and reports
/// Spearman rank correlations over all pairs.
CorrelationCurve covariance_pose_correlation(
    const std::vector<SyntheticSample>& samples, const FeatureFn& feature_fn,
    const CorrelationConfig& cfg);

void write_correlation_csv(const CorrelationCurve& curve,
                           const std::string& path);

}  // namespace covpose

#endif  // COVPOSE_METRICS_HPP
