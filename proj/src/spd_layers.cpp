#include "covpose/spd_layers.hpp"

#include <cmath>

namespace covpose {

namespace {

void check_feature_map(const FeatureMap& f) {
  require(f.channels >= 2, ErrorCode::InvalidInput,
          "covariance pooling needs at least 2 channels");
  require(f.x.rows() == f.channels && f.x.cols() == f.spatial_size(),
          ErrorCode::InvalidInput, "feature map storage has wrong shape");
  require(all_finite(f.x), ErrorCode::InvalidInput,
          "feature map has non-finite values");
}

}  // namespace

Mat cov_pool(const FeatureMap& f) {
  check_feature_map(f);
  // Center each spatial location over channels, then average the channel
  // outer products. Build the upper triangle and mirror so the output is
  // exactly symmetric.
  const Mat centered = f.x.rowwise() - f.x.colwise().mean();
  Mat sigma = (centered.transpose() * centered) / double(f.channels - 1);
  const Eigen::Index n = sigma.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      sigma(j, i) = sigma(i, j);
    }
  }
  return sigma;
}

Mat cov_pool_backward(const FeatureMap& f, const Mat& d_sigma) {
  check_feature_map(f);
  const Eigen::Index n = f.spatial_size();
  require(d_sigma.rows() == n && d_sigma.cols() == n, ErrorCode::InvalidInput,
          "cov_pool_backward: adjoint shape mismatch");
  const Mat g = sym(d_sigma);
  const Mat centered = f.x.rowwise() - f.x.colwise().mean();
  // d/dX of <G, X~^T X~>/(C-1) is 2 X~ G/(C-1); the mean-removal term
  // vanishes because the centered rows already sum to zero.
  return (2.0 / double(f.channels - 1)) * centered * g;
}

Mat bimap_forward(const Mat& x, const Mat& w) {
  require(x.rows() == x.cols(), ErrorCode::InvalidInput,
          "bimap_forward: X must be square");
  require(w.rows() == x.rows() && w.cols() <= w.rows(),
          ErrorCode::InvalidInput, "bimap_forward: weight shape mismatch");
  Mat y = w.transpose() * x * w;
  return sym(y);
}

BimapGrads bimap_backward(const Mat& x, const Mat& w, const Mat& d_y) {
  require(x.rows() == x.cols() && w.rows() == x.rows(),
          ErrorCode::InvalidInput, "bimap_backward: shape mismatch");
  require(d_y.rows() == w.cols() && d_y.cols() == w.cols(),
          ErrorCode::InvalidInput, "bimap_backward: adjoint shape mismatch");
  const Mat g = sym(d_y);
  BimapGrads out;
  out.d_x = w * g * w.transpose();
  out.d_w = 2.0 * x * w * g;
  return out;
}

Mat reeig_forward(const Mat& x, double eps) {
  require(eps > 0.0, ErrorCode::InvalidInput, "reeig_forward: eps must be > 0");
  const SymEigPair pair = sym_eig(x);
  const Vec clamped = pair.lambda.cwiseMax(eps);
  return sym(pair.u * clamped.asDiagonal() * pair.u.transpose());
}

Mat reeig_backward(const Mat& x, double eps, const Mat& d_y) {
  require(eps > 0.0, ErrorCode::InvalidInput, "reeig_backward: eps must be > 0");
  const SymEigPair pair = sym_eig(x);
  const Mat g = sym(d_y);
  const Vec clamped = pair.lambda.cwiseMax(eps);

  const Mat m = pair.u.transpose() * g * pair.u;
  Vec d_lambda(pair.lambda.size());
  for (Eigen::Index i = 0; i < pair.lambda.size(); ++i) {
    d_lambda(i) = pair.lambda(i) > eps ? m(i, i) : 0.0;
  }
  const Mat d_u = 2.0 * g * pair.u * clamped.asDiagonal();
  return sym_eig_backward(pair, d_lambda, d_u);
}

Mat log_eig(const Mat& x) {
  const SymEigPair pair = sym_eig(x);
  require(pair.lambda(pair.lambda.size() - 1) > 0.0,
          ErrorCode::NotPositiveDefinite, "log_eig: input is not SPD");
  const Vec logged = pair.lambda.array().log();
  return sym(pair.u * logged.asDiagonal() * pair.u.transpose());
}

Mat log_eig_backward(const Mat& x, const Mat& d_y) {
  const SymEigPair pair = sym_eig(x);
  require(pair.lambda(pair.lambda.size() - 1) > 0.0,
          ErrorCode::NotPositiveDefinite, "log_eig_backward: input is not SPD");
  const Mat g = sym(d_y);
  const Mat m = pair.u.transpose() * g * pair.u;
  Vec d_lambda(pair.lambda.size());
  for (Eigen::Index i = 0; i < pair.lambda.size(); ++i) {
    d_lambda(i) = m(i, i) / pair.lambda(i);
  }
  const Vec logged = pair.lambda.array().log();
  const Mat d_u = 2.0 * g * pair.u * logged.asDiagonal();
  return sym_eig_backward(pair, d_lambda, d_u);
}

double log_euclidean_distance(const Mat& a, const Mat& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          ErrorCode::InvalidInput,
          "log_euclidean_distance: dimension mismatch");
  return (log_eig(a) - log_eig(b)).norm();
}

Mat channel_cov_pool(const FeatureMap& f) {
  check_feature_map(f);
  require(f.spatial_size() >= 2, ErrorCode::InvalidInput,
          "channel_cov_pool needs at least 2 spatial locations");
  const Mat centered = f.x.colwise() - f.x.rowwise().mean();
  Mat sigma = (centered * centered.transpose()) / double(f.spatial_size() - 1);
  return sym(sigma);
}

Mat channel_cov_pool_backward(const FeatureMap& f, const Mat& d_sigma) {
  check_feature_map(f);
  const Eigen::Index c = f.channels;
  require(d_sigma.rows() == c && d_sigma.cols() == c, ErrorCode::InvalidInput,
          "channel_cov_pool_backward: adjoint shape mismatch");
  const Mat g = sym(d_sigma);
  const Mat centered = f.x.colwise() - f.x.rowwise().mean();
  return (2.0 / double(f.spatial_size() - 1)) * g * centered;
}

}  // namespace covpose
