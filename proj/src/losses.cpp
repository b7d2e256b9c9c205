#include "covpose/losses.hpp"

#include <Eigen/LU>

#include "covpose/spd_layers.hpp"

#include <cmath>

namespace covpose {

namespace {

constexpr double kAcosClampMargin = 1e-7;

void check_rotation(const Mat3& r, const char* name) {
  const double ortho = (r.transpose() * r - Mat3::Identity()).norm();
  require(ortho <= 1e-6, ErrorCode::InvalidInput,
          std::string(name) + " is not orthonormal");
  require(std::abs(r.determinant() - 1.0) <= 1e-6, ErrorCode::InvalidInput,
          std::string(name) + " does not have determinant +1");
}

}  // namespace

GeodesicLoss geodesic_rotation_loss(const Mat3& r_hat, const Mat3& r_gt) {
  check_rotation(r_hat, "r_hat");
  check_rotation(r_gt, "r_gt");

  const double raw = ((r_hat.transpose() * r_gt).trace() - 1.0) / 2.0;
  const double lo = -1.0 + kAcosClampMargin;
  const double hi = 1.0 - kAcosClampMargin;
  const double clamped = std::min(std::max(raw, lo), hi);

  GeodesicLoss out;
  out.value = std::acos(clamped);
  if (raw > lo && raw < hi) {
    const double d_arg = -1.0 / std::sqrt(1.0 - clamped * clamped);
    out.d_r_hat = (d_arg / 2.0) * r_gt;
  }
  return out;
}

PoseLossResult pose_loss(const PoseParams6D& p_hat, const Mat3& r_gt,
                         const Vec3& t_gt, double lambda) {
  const Mat3 r_hat = gram_schmidt_so3(p_hat.u, p_hat.v);
  const GeodesicLoss geo = geodesic_rotation_loss(r_hat, r_gt);
  const GramSchmidtGrads gs = gram_schmidt_backward(p_hat.u, p_hat.v,
                                                    geo.d_r_hat);

  const Vec3 t_diff = p_hat.t - t_gt;
  const double t_norm = t_diff.norm();

  const double dot_uv = p_hat.u.dot(p_hat.v);
  const double nu = p_hat.u.norm();
  const double nv = p_hat.v.norm();
  const double reg = dot_uv * dot_uv + (nu - 1.0) * (nu - 1.0) +
                     (nv - 1.0) * (nv - 1.0);

  PoseLossResult out;
  out.breakdown.rotation_geodesic = geo.value;
  out.breakdown.translation_l2 = t_norm;
  out.breakdown.regularizer = reg;
  out.breakdown.lambda = lambda;
  out.breakdown.total = geo.value + t_norm + lambda * reg;

  out.d_u = gs.d_u + lambda * (2.0 * dot_uv * p_hat.v +
                               2.0 * (nu - 1.0) * p_hat.u / nu);
  out.d_v = gs.d_v + lambda * (2.0 * dot_uv * p_hat.u +
                               2.0 * (nv - 1.0) * p_hat.v / nv);
  out.d_t = t_norm > 0.0 ? Vec3(t_diff / t_norm) : Vec3::Zero();
  return out;
}

EulerLossResult euler_pose_loss(const EulerPoseParams& p_hat, const Mat3& r_gt,
                                const Vec3& t_gt) {
  const Mat3 r_hat = euler_to_rotation(p_hat.theta);
  const GeodesicLoss geo = geodesic_rotation_loss(r_hat, r_gt);

  const Vec3 t_diff = p_hat.t - t_gt;
  const double t_norm = t_diff.norm();

  EulerLossResult out;
  out.breakdown.rotation_geodesic = geo.value;
  out.breakdown.translation_l2 = t_norm;
  out.breakdown.total = geo.value + t_norm;
  out.d_theta = euler_to_rotation_backward(p_hat.theta, geo.d_r_hat);
  out.d_t = t_norm > 0.0 ? Vec3(t_diff / t_norm) : Vec3::Zero();
  return out;
}

LogTangentLossResult log_tangent_frobenius_loss(const Mat& z_pred,
                                                const Mat& z_gt) {
  require(z_pred.rows() == z_gt.rows() && z_pred.cols() == z_gt.cols(),
          ErrorCode::InvalidInput,
          "log_tangent_frobenius_loss: dimension mismatch");
  const Mat diff = log_eig(z_pred) - log_eig(z_gt);
  LogTangentLossResult out;
  out.value = diff.squaredNorm();
  out.d_z_pred = log_eig_backward(z_pred, 2.0 * diff);
  return out;
}

}  // namespace covpose
