#include "covpose/model.hpp"

#include <cmath>

namespace covpose {

const char* variant_name(VariantId v) {
  switch (v) {
    case VariantId::Full6D: return "full6d";
    case VariantId::EulerSPD3: return "euler_spd3";
    case VariantId::MlpHead: return "mlp_head";
    case VariantId::ChannelCov: return "channel_cov";
    case VariantId::LogTangent: return "log_tangent";
  }
  return "unknown";
}

VariantId variant_from_name(const std::string& name) {
  if (name == "full6d") return VariantId::Full6D;
  if (name == "euler_spd3") return VariantId::EulerSPD3;
  if (name == "mlp_head") return VariantId::MlpHead;
  if (name == "channel_cov") return VariantId::ChannelCov;
  if (name == "log_tangent") return VariantId::LogTangent;
  throw Error(ErrorCode::ConfigError, "unknown variant: " + name);
}

void SpdHeadConfig::validate() const {
  require(dims.size() >= 2, ErrorCode::ConfigError,
          "SPD head needs at least one layer");
  for (std::size_t i = 1; i < dims.size(); ++i) {
    require(dims[i] < dims[i - 1], ErrorCode::ConfigError,
            "SPD head dims must be strictly descending");
    require(dims[i] >= 1, ErrorCode::ConfigError, "SPD head dims must be >= 1");
  }
  require(eps_reeig > 0.0, ErrorCode::ConfigError, "eps_reeig must be > 0");
}

Vec upper_triangle_vec(const Mat& sigma) {
  const Eigen::Index n = sigma.rows();
  Vec out(n * (n + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      out(k++) = sigma(i, j);
    }
  }
  return out;
}

namespace {

// Adjoint of upper_triangle_vec as a gradient with respect to the full
// symmetric matrix: off-diagonal weight splits across the mirrored pair.
Mat upper_triangle_vec_backward(const Vec& d_vec, Eigen::Index n) {
  Mat d_sigma = Mat::Zero(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j, ++k) {
      if (i == j) {
        d_sigma(i, i) = d_vec(k);
      } else {
        d_sigma(i, j) = 0.5 * d_vec(k);
        d_sigma(j, i) = 0.5 * d_vec(k);
      }
    }
  }
  return d_sigma;
}

FeatureMap image_to_feature_map(const Mat& image) {
  FeatureMap f;
  f.channels = 1;
  f.height = int(image.rows());
  f.width = int(image.cols());
  f.x = image.reshaped<Eigen::RowMajor>(1, image.size());
  return f;
}

PoseParams6D params_from_vec9(const Vec& y) {
  PoseParams6D p;
  p.u = y.segment<3>(0);
  p.v = y.segment<3>(3);
  p.t = y.segment<3>(6);
  return p;
}

}  // namespace

void PoseModel::init(const ToyBackboneConfig& backbone_cfg,
                     const SpdHeadConfig& head_cfg, VariantId variant,
                     std::uint64_t seed) {
  backbone_cfg_ = backbone_cfg;
  head_cfg_ = head_cfg;
  variant_ = variant;
  counters_.reset();

  require(backbone_cfg.output_size() >= 2, ErrorCode::ConfigError,
          "backbone output grid is too small");

  Rng rng = Rng(seed).derive(0xb0b0);
  backbone_.init(1, backbone_cfg.channels, backbone_cfg.kernel,
                 backbone_cfg.init_scale, rng);

  bimap_weights_.clear();
  mlp_ = Mlp{};

  if (variant_ == VariantId::MlpHead) {
    const int n = backbone_cfg.spatial_covariance_dim();
    Rng mlp_rng = Rng(seed).derive(0x313);
    mlp_.init(n * (n + 1) / 2, backbone_cfg.mlp_hidden, 9,
              backbone_cfg.init_scale, mlp_rng);
    return;
  }

  head_cfg_.validate();
  const int expected_front = variant_ == VariantId::ChannelCov
                                 ? backbone_cfg.output_channels()
                                 : backbone_cfg.spatial_covariance_dim();
  require(head_cfg_.dims.front() == expected_front, ErrorCode::ConfigError,
          "SPD head input dim does not match the pooled covariance size");
  const int expected_back = variant_ == VariantId::EulerSPD3 ? 3 : 4;
  require(head_cfg_.dims.back() == expected_back, ErrorCode::ConfigError,
          "SPD head output dim does not match the pose code size");

  for (int l = 0; l < head_cfg_.layer_count(); ++l) {
    const std::uint64_t w_seed = Rng(seed).derive(0x57f + l).next_u64();
    bimap_weights_.push_back(
        init_stiefel(head_cfg_.dims[l], head_cfg_.dims[l + 1], w_seed));
  }
}

Mat PoseModel::spd_head_forward_traced(const Mat& sigma0,
                                       SpdHeadTrace& trace) const {
  trace.sigma.clear();
  trace.pre_reeig.clear();
  trace.sigma.push_back(sigma0);
  Mat s = sigma0;
  for (const Mat& w : bimap_weights_) {
    Mat y = bimap_forward(s, w);
    counters_.bimap += 1;
    s = reeig_forward(y, head_cfg_.eps_reeig);
    counters_.reeig += 1;
    trace.pre_reeig.push_back(std::move(y));
    trace.sigma.push_back(s);
  }
  return s;
}

Mat PoseModel::spd_head_backward(const SpdHeadTrace& trace,
                                 const Mat& d_sigma_out,
                                 std::vector<Mat>& d_weights) const {
  const int layers = int(bimap_weights_.size());
  Mat d_sigma = d_sigma_out;
  for (int l = layers - 1; l >= 0; --l) {
    const Mat d_y =
        reeig_backward(trace.pre_reeig[l], head_cfg_.eps_reeig, d_sigma);
    const BimapGrads g = bimap_backward(trace.sigma[l], bimap_weights_[l], d_y);
    d_weights[l] += g.d_w;
    d_sigma = g.d_x;
  }
  return d_sigma;
}

ForwardResult PoseModel::forward(const Mat& image) const {
  require(image.rows() == backbone_cfg_.input_size &&
              image.cols() == backbone_cfg_.input_size,
          ErrorCode::InvalidInput, "forward: unexpected image size");
  ForwardResult out;
  const FeatureMap input = image_to_feature_map(image);
  out.trace.features = backbone_.forward(input, out.trace.conv);

  if (variant_ == VariantId::MlpHead) {
    out.trace.sigma0 = cov_pool(out.trace.features);
    counters_.cov_pool += 1;
    const Vec v = upper_triangle_vec(out.trace.sigma0);
    const Vec y = mlp_forward(mlp_, v, out.trace.mlp);
    counters_.mlp += 1;
    out.trace.params6d = params_from_vec9(y);
    out.r_hat = gram_schmidt_so3(out.trace.params6d.u, out.trace.params6d.v);
    out.t_hat_norm = out.trace.params6d.t;
    return out;
  }

  if (variant_ == VariantId::ChannelCov) {
    out.trace.sigma0 = channel_cov_pool(out.trace.features);
    counters_.channel_cov_pool += 1;
  } else {
    out.trace.sigma0 = cov_pool(out.trace.features);
    counters_.cov_pool += 1;
  }

  out.spd_code = spd_head_forward_traced(out.trace.sigma0, out.trace.head);

  switch (variant_) {
    case VariantId::Full6D:
    case VariantId::ChannelCov: {
      out.trace.params6d = decode_spd_to_params(out.spd_code);
      counters_.cholesky_decode += 1;
      out.r_hat = gram_schmidt_so3(out.trace.params6d.u, out.trace.params6d.v);
      out.t_hat_norm = out.trace.params6d.t;
      break;
    }
    case VariantId::EulerSPD3: {
      out.trace.euler_params = decode_euler(out.spd_code);
      counters_.cholesky_decode += 1;
      out.r_hat = euler_to_rotation(out.trace.euler_params.theta);
      out.t_hat_norm = out.trace.euler_params.t;
      break;
    }
    case VariantId::LogTangent:
      break;  // stops at the SPD code
    default:
      break;
  }
  return out;
}

LossBreakdown PoseModel::sample_loss_and_grads(const Mat& image,
                                               const Mat3& r_gt,
                                               const Vec3& t_gt_norm,
                                               double lambda,
                                               ModelGrads* grads) const {
  const ForwardResult fwd = forward(image);

  LossBreakdown breakdown;
  Mat d_sigma0;

  if (variant_ == VariantId::MlpHead) {
    const PoseLossResult loss =
        pose_loss(fwd.trace.params6d, r_gt, t_gt_norm, lambda);
    breakdown = loss.breakdown;
    if (!grads) return breakdown;
    Vec d_y(9);
    d_y << loss.d_u, loss.d_v, loss.d_t;
    const Vec d_vec = mlp_backward(mlp_, fwd.trace.mlp, d_y, grads->mlp);
    d_sigma0 =
        upper_triangle_vec_backward(d_vec, fwd.trace.sigma0.rows());
  } else {
    Mat d_code;
    switch (variant_) {
      case VariantId::Full6D:
      case VariantId::ChannelCov: {
        const PoseLossResult loss =
            pose_loss(fwd.trace.params6d, r_gt, t_gt_norm, lambda);
        breakdown = loss.breakdown;
        if (!grads) return breakdown;
        PoseParams6D d_params;
        d_params.u = loss.d_u;
        d_params.v = loss.d_v;
        d_params.t = loss.d_t;
        d_code = decode_spd_to_params_backward(fwd.spd_code, d_params);
        break;
      }
      case VariantId::EulerSPD3: {
        const EulerLossResult loss =
            euler_pose_loss(fwd.trace.euler_params, r_gt, t_gt_norm);
        breakdown = loss.breakdown;
        if (!grads) return breakdown;
        EulerPoseParams d_params;
        d_params.theta = loss.d_theta;
        d_params.t = loss.d_t;
        d_code = decode_euler_backward(fwd.spd_code, d_params);
        break;
      }
      case VariantId::LogTangent: {
        PoseParams6D gt;
        gt.u = r_gt.col(0);
        gt.v = r_gt.col(1);
        gt.t = t_gt_norm;
        const Mat z_gt = encode_pose_to_spd(gt);
        const LogTangentLossResult loss =
            log_tangent_frobenius_loss(fwd.spd_code, z_gt);
        breakdown.log_tangent = loss.value;
        breakdown.lambda = lambda;
        breakdown.total = loss.value;
        if (!grads) return breakdown;
        d_code = loss.d_z_pred;
        break;
      }
      default:
        throw Error(ErrorCode::ConfigError, "unhandled variant");
    }
    d_sigma0 = spd_head_backward(fwd.trace.head, d_code, grads->bimap);
  }

  FeatureMap d_features =
      FeatureMap::zeros(fwd.trace.features.channels, fwd.trace.features.height,
                        fwd.trace.features.width);
  if (variant_ == VariantId::ChannelCov) {
    d_features.x = channel_cov_pool_backward(fwd.trace.features, d_sigma0);
  } else {
    d_features.x = cov_pool_backward(fwd.trace.features, d_sigma0);
  }

  std::vector<ConvGrads> conv_grads;
  backbone_.backward(fwd.trace.conv, d_features, conv_grads);
  for (std::size_t i = 0; i < conv_grads.size(); ++i) {
    grads->conv[i].d_w += conv_grads[i].d_w;
    grads->conv[i].d_b += conv_grads[i].d_b;
  }
  return breakdown;
}

ModelGrads PoseModel::zero_grads() const {
  ModelGrads g;
  for (const ConvLayer& layer : backbone_.layers) {
    ConvGrads cg;
    cg.d_w = Mat::Zero(layer.w.rows(), layer.w.cols());
    cg.d_b = Vec::Zero(layer.b.size());
    g.conv.push_back(std::move(cg));
  }
  for (const Mat& w : bimap_weights_) {
    g.bimap.push_back(Mat::Zero(w.rows(), w.cols()));
  }
  if (variant_ == VariantId::MlpHead) {
    g.mlp.d_w1 = Mat::Zero(mlp_.w1.rows(), mlp_.w1.cols());
    g.mlp.d_b1 = Vec::Zero(mlp_.b1.size());
    g.mlp.d_w2 = Mat::Zero(mlp_.w2.rows(), mlp_.w2.cols());
    g.mlp.d_b2 = Vec::Zero(mlp_.b2.size());
  }
  return g;
}

Eigen::Index PoseModel::euclidean_parameter_count() const {
  Eigen::Index n = backbone_.parameter_count();
  if (variant_ == VariantId::MlpHead) n += mlp_.parameter_count();
  return n;
}

Eigen::Index PoseModel::stiefel_parameter_count() const {
  Eigen::Index n = 0;
  for (const Mat& w : bimap_weights_) n += w.size();
  return n;
}

Vec PoseModel::flatten_euclidean() const {
  Vec flat(euclidean_parameter_count());
  Eigen::Index at = 0;
  for (const ConvLayer& layer : backbone_.layers) {
    flat.segment(at, layer.w.size()) = layer.w.reshaped();
    at += layer.w.size();
    flat.segment(at, layer.b.size()) = layer.b;
    at += layer.b.size();
  }
  if (variant_ == VariantId::MlpHead) {
    flat.segment(at, mlp_.w1.size()) = mlp_.w1.reshaped();
    at += mlp_.w1.size();
    flat.segment(at, mlp_.b1.size()) = mlp_.b1;
    at += mlp_.b1.size();
    flat.segment(at, mlp_.w2.size()) = mlp_.w2.reshaped();
    at += mlp_.w2.size();
    flat.segment(at, mlp_.b2.size()) = mlp_.b2;
    at += mlp_.b2.size();
  }
  return flat;
}

void PoseModel::unflatten_euclidean(const Vec& flat) {
  require(flat.size() == euclidean_parameter_count(), ErrorCode::InvalidInput,
          "unflatten_euclidean: size mismatch");
  Eigen::Index at = 0;
  for (ConvLayer& layer : backbone_.layers) {
    layer.w.reshaped() = flat.segment(at, layer.w.size());
    at += layer.w.size();
    layer.b = flat.segment(at, layer.b.size());
    at += layer.b.size();
  }
  if (variant_ == VariantId::MlpHead) {
    mlp_.w1.reshaped() = flat.segment(at, mlp_.w1.size());
    at += mlp_.w1.size();
    mlp_.b1 = flat.segment(at, mlp_.b1.size());
    at += mlp_.b1.size();
    mlp_.w2.reshaped() = flat.segment(at, mlp_.w2.size());
    at += mlp_.w2.size();
    mlp_.b2 = flat.segment(at, mlp_.b2.size());
    at += mlp_.b2.size();
  }
}

Vec PoseModel::flatten_euclidean_grads(const ModelGrads& grads) const {
  Vec flat(euclidean_parameter_count());
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < backbone_.layers.size(); ++i) {
    flat.segment(at, grads.conv[i].d_w.size()) = grads.conv[i].d_w.reshaped();
    at += grads.conv[i].d_w.size();
    flat.segment(at, grads.conv[i].d_b.size()) = grads.conv[i].d_b;
    at += grads.conv[i].d_b.size();
  }
  if (variant_ == VariantId::MlpHead) {
    flat.segment(at, grads.mlp.d_w1.size()) = grads.mlp.d_w1.reshaped();
    at += grads.mlp.d_w1.size();
    flat.segment(at, grads.mlp.d_b1.size()) = grads.mlp.d_b1;
    at += grads.mlp.d_b1.size();
    flat.segment(at, grads.mlp.d_w2.size()) = grads.mlp.d_w2.reshaped();
    at += grads.mlp.d_w2.size();
    flat.segment(at, grads.mlp.d_b2.size()) = grads.mlp.d_b2;
    at += grads.mlp.d_b2.size();
  }
  return flat;
}

Mat spd_head_forward(const Mat& sigma0, const std::vector<Mat>& weights,
                     double eps) {
  Mat s = sigma0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    require(weights[l].rows() == s.rows(), ErrorCode::ConfigError,
            "spd_head_forward: dimension chain mismatch");
    s = reeig_forward(bimap_forward(s, weights[l]), eps);
  }
  return s;
}

ParameterCounts count_parameters(const PoseModel& model) {
  ParameterCounts c;
  c.euclidean = model.euclidean_parameter_count();
  c.stiefel = model.stiefel_parameter_count();
  return c;
}

LossBreakdown train_step(PoseModel& model,
                         const std::vector<TrainBatchSample>& batch,
                         OptimizerStates& opt, double lambda,
                         int* skipped_out) {
  require(!batch.empty(), ErrorCode::InvalidInput, "train_step: empty batch");
  ModelGrads grads = model.zero_grads();

  LossBreakdown mean;
  mean.lambda = lambda;
  int contributing = 0;
  for (const TrainBatchSample& sample : batch) {
    LossBreakdown b;
    try {
      b = model.sample_loss_and_grads(sample.image, sample.r_gt,
                                      sample.t_gt_norm, lambda, &grads);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DegenerateRotation) continue;  // skip sample
      throw;
    }
    ++contributing;
    mean.rotation_geodesic += b.rotation_geodesic;
    mean.translation_l2 += b.translation_l2;
    mean.regularizer += b.regularizer;
    mean.log_tangent += b.log_tangent;
    mean.total += b.total;
  }
  if (skipped_out) *skipped_out = int(batch.size()) - contributing;
  if (contributing == 0) return mean;  // nothing usable in this batch
  const double inv = 1.0 / double(contributing);
  mean.rotation_geodesic *= inv;
  mean.translation_l2 *= inv;
  mean.regularizer *= inv;
  mean.log_tangent *= inv;
  mean.total *= inv;

  require(std::isfinite(mean.total), ErrorCode::DivergenceDetected,
          "train_step: non-finite loss");

  Vec flat_grads = model.flatten_euclidean_grads(grads) * inv;
  Vec params = model.flatten_euclidean();
  adam_step(opt.adam, params, flat_grads);
  model.unflatten_euclidean(params);

  auto& weights = model.bimap_weights();
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] = stiefel_step(weights[l], grads.bimap[l] * inv,
                              opt.lr_stiefel);
  }
  return mean;
}

}  // namespace covpose
