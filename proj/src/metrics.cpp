#include "covpose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace covpose {

double add_metric(const std::vector<Vec3>& points, const PoseSE3& pose_hat,
                  const PoseSE3& pose_gt) {
  require(!points.empty(), ErrorCode::InvalidInput, "add_metric: no points");
  double sum = 0.0;
  for (const Vec3& p : points) {
    sum += ((pose_hat.r * p + pose_hat.t) - (pose_gt.r * p + pose_gt.t)).norm();
  }
  return sum / double(points.size());
}

double adds_metric(const std::vector<Vec3>& points, const PoseSE3& pose_hat,
                   const PoseSE3& pose_gt) {
  require(!points.empty(), ErrorCode::InvalidInput, "adds_metric: no points");
  std::vector<Vec3> gt;
  gt.reserve(points.size());
  for (const Vec3& p : points) gt.push_back(pose_gt.r * p + pose_gt.t);

  double sum = 0.0;
  for (const Vec3& p : points) {
    const Vec3 hat = pose_hat.r * p + pose_hat.t;
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& q : gt) best = std::min(best, (hat - q).norm());
    sum += best;
  }
  return sum / double(points.size());
}

double add_accuracy(const std::vector<double>& errors, double diameter) {
  require(!errors.empty(), ErrorCode::InvalidInput, "add_accuracy: no errors");
  require(diameter > 0.0, ErrorCode::InvalidInput,
          "add_accuracy: diameter must be > 0");
  long long correct = 0;
  for (double e : errors) {
    if (e < 0.1 * diameter) ++correct;
  }
  return double(correct) / double(errors.size());
}

double auc_add(const std::vector<double>& errors, double max_threshold) {
  require(!errors.empty(), ErrorCode::InvalidInput, "auc_add: no errors");
  require(max_threshold > 0.0, ErrorCode::InvalidInput,
          "auc_add: threshold must be > 0");
  // Exact integral of the empirical CDF: each error e below the cap
  // contributes (cap - e) to the un-normalized area.
  double area = 0.0;
  for (double e : errors) {
    if (e < max_threshold) area += max_threshold - e;
  }
  return area / (max_threshold * double(errors.size()));
}

double median(std::vector<double> values) {
  require(!values.empty(), ErrorCode::InvalidInput, "median of empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

MetricReport build_metric_report(const std::vector<PerSampleMetrics>& samples,
                                 double diameter, double auc_max_threshold) {
  require(!samples.empty(), ErrorCode::InvalidInput,
          "build_metric_report: no samples");
  MetricReport report;
  report.samples = samples;
  std::vector<double> adds, addss, rot, trans;
  for (const PerSampleMetrics& s : samples) {
    adds.push_back(s.add);
    addss.push_back(s.adds);
    rot.push_back(s.rotation_error_deg);
    trans.push_back(s.translation_error_m);
  }
  report.add_mean = std::accumulate(adds.begin(), adds.end(), 0.0) /
                    double(adds.size());
  report.adds_mean = std::accumulate(addss.begin(), addss.end(), 0.0) /
                     double(addss.size());
  report.add_accuracy = add_accuracy(adds, diameter);
  report.auc_add = auc_add(adds, auc_max_threshold);
  report.median_rotation_error_deg = median(rot);
  report.median_translation_error_m = median(trans);
  return report;
}

void write_metric_report_csv(const MetricReport& report,
                             const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot open " + path);
  out << "id,add_m,adds_m,rotation_error_deg,translation_error_m\n";
  out.precision(17);
  for (const PerSampleMetrics& s : report.samples) {
    out << s.id << "," << s.add << "," << s.adds << ","
        << s.rotation_error_deg << "," << s.translation_error_m << "\n";
  }
  out << "summary," << report.add_mean << "," << report.adds_mean << ","
      << report.median_rotation_error_deg << ","
      << report.median_translation_error_m << "\n";
  out << "# add_accuracy=" << report.add_accuracy
      << " auc_add=" << report.auc_add << "\n";
  require(out.good(), ErrorCode::IoError, "failed writing " + path);
}

double spearman_rank_correlation(const std::vector<double>& a,
                                 const std::vector<double>& b) {
  require(a.size() == b.size(), ErrorCode::InvalidInput,
          "spearman: length mismatch");
  require(a.size() >= 2, ErrorCode::InvalidInput, "spearman: need >= 2 values");

  auto ranks = [](const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) {
                       return values[i] < values[j];
                     });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
      const double avg = 0.5 * (double(i) + double(j)) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };

  const std::vector<double> ra = ranks(a);
  const std::vector<double> rb = ranks(b);
  const double n = double(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va <= 0.0 || vb <= 0.0) return 0.0;  // constant sequence: undefined
  return cov / std::sqrt(va * vb);
}

CorrelationCurve covariance_pose_correlation(
    const std::vector<SyntheticSample>& samples, const FeatureFn& feature_fn,
    const CorrelationConfig& cfg) {
  require(samples.size() >= 2, ErrorCode::InvalidInput,
          "covariance_pose_correlation needs at least 2 samples");
  require(cfg.n_pairs >= 1 && cfg.n_bins >= 1, ErrorCode::InvalidInput,
          "covariance_pose_correlation: bad configuration");

  // Per-sample features are cached once: the pairwise stage only needs the
  // log-covariance and the flattened feature vector.
  const std::size_t n = samples.size();
  std::vector<Mat> log_cov(n);
  std::vector<Vec> flat(n);
  for (std::size_t i = 0; i < n; ++i) {
    const FeatureMap f = feature_fn(samples[i].image);
    const Mat cov = reeig_forward(cov_pool(f), cfg.eps_reeig);
    log_cov[i] = log_eig(cov);
    flat[i] = f.x.reshaped();
  }

  Rng rng(cfg.seed);
  std::vector<double> pose_d, cov_d, cos_d, euc_d;
  pose_d.reserve(cfg.n_pairs);
  for (int k = 0; k < cfg.n_pairs; ++k) {
    const std::size_t i = std::size_t(rng.bounded(n));
    std::size_t j = std::size_t(rng.bounded(n));
    while (j == i) j = std::size_t(rng.bounded(n));

    pose_d.push_back(se3_distance(samples[i].pose_gt, samples[j].pose_gt,
                                  cfg.pose_distance_scale));
    cov_d.push_back((log_cov[i] - log_cov[j]).norm());
    const double ni = flat[i].norm();
    const double nj = flat[j].norm();
    const double cosine = (ni > 0.0 && nj > 0.0)
                              ? flat[i].dot(flat[j]) / (ni * nj)
                              : 1.0;
    cos_d.push_back(1.0 - cosine);
    euc_d.push_back((flat[i] - flat[j]).norm());
  }

  CorrelationCurve curve;
  curve.spearman_cov = spearman_rank_correlation(pose_d, cov_d);
  curve.spearman_cosine = spearman_rank_correlation(pose_d, cos_d);
  curve.spearman_euclid = spearman_rank_correlation(pose_d, euc_d);

  const double max_d = *std::max_element(pose_d.begin(), pose_d.end());
  const double width = max_d > 0.0 ? max_d / cfg.n_bins : 1.0;
  std::vector<CorrelationBin> bins(cfg.n_bins);
  for (int b = 0; b < cfg.n_bins; ++b) {
    bins[b].center = (b + 0.5) * width;
  }
  for (std::size_t k = 0; k < pose_d.size(); ++k) {
    int b = width > 0.0 ? int(pose_d[k] / width) : 0;
    b = std::min(b, cfg.n_bins - 1);
    bins[b].mean_cov_dist += cov_d[k];
    bins[b].mean_cosine_dist += cos_d[k];
    bins[b].mean_euclid_dist += euc_d[k];
    bins[b].count += 1;
  }
  for (CorrelationBin& bin : bins) {
    if (bin.count == 0) continue;  // dropped below
    bin.mean_cov_dist /= double(bin.count);
    bin.mean_cosine_dist /= double(bin.count);
    bin.mean_euclid_dist /= double(bin.count);
    curve.bins.push_back(bin);
  }
  return curve;
}

void write_correlation_csv(const CorrelationCurve& curve,
                           const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot open " + path);
  out.precision(17);
  out << "bin_center,mean_cov_dist,mean_cosine_dist,mean_euclid_dist,count\n";
  for (const CorrelationBin& bin : curve.bins) {
    out << bin.center << "," << bin.mean_cov_dist << ","
        << bin.mean_cosine_dist << "," << bin.mean_euclid_dist << ","
        << bin.count << "\n";
  }
  out << "# spearman_cov=" << curve.spearman_cov
      << " spearman_cosine=" << curve.spearman_cosine
      << " spearman_euclid=" << curve.spearman_euclid << "\n";
  require(out.good(), ErrorCode::IoError, "failed writing " + path);
}

}  // namespace covpose
