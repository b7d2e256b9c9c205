#ifndef COVPOSE_MODEL_HPP
#define COVPOSE_MODEL_HPP

#include "covpose/backbone.hpp"
#include "covpose/common.hpp"
#include "covpose/losses.hpp"
#include "covpose/optim.hpp"
#include "covpose/pose_codec.hpp"
#include "covpose/spd_layers.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace covpose {

enum class VariantId { Full6D, EulerSPD3, MlpHead, ChannelCov, LogTangent };

const char* variant_name(VariantId v);
VariantId variant_from_name(const std::string& name);

/// Dimension chain of the BiMap/ReEig stack. dims.front() must match the
/// covariance size fed in; dims.back() is the SPD code size (4, or 3 for
/// the Euler variant).
struct SpdHeadConfig {
  std::vector<int> dims = {16, 12, 8, 6, 4};
  double eps_reeig = 1e-4;

  int layer_count() const { return int(dims.size()) - 1; }
  void validate() const;
};

struct ToyBackboneConfig {
  int input_size = 32;
  std::vector<int> channels = {8, 16, 32};
  int kernel = 3;  // odd; stride-2 stages pad by kernel/2
  double init_scale = 2.0;
  int mlp_hidden = 256;

  int output_channels() const { return channels.back(); }
  int output_size() const {
    int s = input_size;
    const int pad = kernel / 2;
    for (std::size_t i = 0; i < channels.size(); ++i) {
      s = (s + 2 * pad - kernel) / 2 + 1;
    }
    return s;
  }
  int spatial_covariance_dim() const {
    return output_size() * output_size();
  }
};

/// Counters proving which code paths a run exercised (the MLP variant must
/// never touch the SPD stack; the log-tangent variant must not decode
/// during training).
struct OpCounters {
  std::int64_t cov_pool = 0;
  std::int64_t channel_cov_pool = 0;
  std::int64_t bimap = 0;
  std::int64_t reeig = 0;
  std::int64_t cholesky_decode = 0;
  std::int64_t mlp = 0;

  void reset() { *this = OpCounters{}; }
};

struct SpdHeadTrace {
  std::vector<Mat> sigma;  // sigma[0] = input, sigma[L] = output
  std::vector<Mat> pre_reeig;
};

struct ModelTrace {
  std::vector<ConvTrace> conv;
  FeatureMap features;
  Mat sigma0;
  SpdHeadTrace head;
  MlpTrace mlp;
  PoseParams6D params6d;
  EulerPoseParams euler_params;
};

/// Everything forward produces: the pose estimate plus the intermediates
/// needed for the backward pass and for analysis. The log-tangent variant
/// stops at the SPD code and leaves r_hat/t_hat at their defaults; its pose
/// readout happens only at evaluation time, outside the model.
struct ForwardResult {
  Mat3 r_hat = Mat3::Identity();
  Vec3 t_hat_norm = Vec3::Zero();
  Mat spd_code;  // final SPD matrix (empty for the MLP variant)
  ModelTrace trace;
};

struct ModelGrads {
  std::vector<ConvGrads> conv;
  std::vector<Mat> bimap;  // Euclidean gradients, pre-projection
  MlpGrads mlp;
};

/// Stacks the upper triangle of a symmetric matrix (row-major over i <= j)
/// into a vector of n(n+1)/2 unique entries.
Vec upper_triangle_vec(const Mat& sigma);

class PoseModel {
 public:
  void init(const ToyBackboneConfig& backbone_cfg, const SpdHeadConfig& head_cfg,
            VariantId variant, std::uint64_t seed);

  ForwardResult forward(const Mat& image) const;

  /// Loss of one sample, optionally with gradients. r_gt / t_gt_norm are the
  /// supervision targets (translation already normalized). When `grads` is
  /// non-null the sample gradients are accumulated into it; it must come
  /// from zero_grads().
  LossBreakdown sample_loss_and_grads(const Mat& image, const Mat3& r_gt,
                                      const Vec3& t_gt_norm, double lambda,
                                      ModelGrads* grads) const;

  ModelGrads zero_grads() const;

  // Flat view of the Euclidean (Adam) group; BiMap weights form the
  // Stiefel group. Together the two groups cover every trainable parameter
  // exactly once.
  Eigen::Index euclidean_parameter_count() const;
  Eigen::Index stiefel_parameter_count() const;
  Vec flatten_euclidean() const;
  void unflatten_euclidean(const Vec& flat);
  Vec flatten_euclidean_grads(const ModelGrads& grads) const;

  const std::vector<Mat>& bimap_weights() const { return bimap_weights_; }
  std::vector<Mat>& bimap_weights() { return bimap_weights_; }
  const ToyBackbone& backbone() const { return backbone_; }
  const Mlp& mlp() const { return mlp_; }
  VariantId variant() const { return variant_; }
  const SpdHeadConfig& head_config() const { return head_cfg_; }
  const ToyBackboneConfig& backbone_config() const { return backbone_cfg_; }
  const OpCounters& counters() const { return counters_; }
  void reset_counters() { counters_.reset(); }

  Mat spd_head_forward_traced(const Mat& sigma0, SpdHeadTrace& trace) const;
  Mat spd_head_backward(const SpdHeadTrace& trace, const Mat& d_sigma_out,
                        std::vector<Mat>& d_weights) const;

 private:
  ToyBackboneConfig backbone_cfg_;
  SpdHeadConfig head_cfg_;
  VariantId variant_ = VariantId::Full6D;
  ToyBackbone backbone_;
  std::vector<Mat> bimap_weights_;
  Mlp mlp_;
  mutable OpCounters counters_;
};

/// Stack of BiMap + ReEig layers (free-function form used by tests).
Mat spd_head_forward(const Mat& sigma0, const std::vector<Mat>& weights,
                     double eps);

struct ParameterCounts {
  Eigen::Index euclidean = 0;
  Eigen::Index stiefel = 0;
  Eigen::Index total() const { return euclidean + stiefel; }
};

ParameterCounts count_parameters(const PoseModel& model);

struct TrainBatchSample {
  Mat image;
  Mat3 r_gt;
  Vec3 t_gt_norm;
};

struct OptimizerStates {
  AdamState adam;
  double lr_stiefel = 1e-2;
};

/// One optimization step on a batch: mean loss/gradients, Adam update on the
/// Euclidean group, projected-gradient + QR retraction on each BiMap weight.
/// Samples whose rotation readout is degenerate are skipped (and counted in
/// *skipped_out when given); the step is a no-op if every sample is skipped.
/// Throws DivergenceDetected when the loss turns non-finite.
LossBreakdown train_step(PoseModel& model, const std::vector<TrainBatchSample>& batch,
                         OptimizerStates& opt, double lambda,
                         int* skipped_out = nullptr);

}  // namespace covpose

#endif  // COVPOSE_MODEL_HPP
