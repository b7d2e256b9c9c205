#ifndef COVPOSE_LOSSES_HPP
#define COVPOSE_LOSSES_HPP

#include "covpose/common.hpp"
#include "covpose/pose_codec.hpp"

namespace covpose {

/// Additive decomposition of a training loss. For the pose loss,
/// total = rotation_geodesic + translation_l2 + lambda * regularizer;
/// the log_tangent term is used only by the tangent-space variant and is
/// zero otherwise.
struct LossBreakdown {
  double rotation_geodesic = 0.0;
  double translation_l2 = 0.0;
  double regularizer = 0.0;
  double log_tangent = 0.0;
  double lambda = 0.0;
  double total = 0.0;
};

struct GeodesicLoss {
  double value = 0.0;  // radians, in [0, pi]
  Mat3 d_r_hat = Mat3::Zero();
};

/// Geodesic distance on SO(3): arccos((tr(R_hat^T R_gt) - 1) / 2). The
/// arccos argument is clamped to [-1 + 1e-7, 1 - 1e-7]; inside the clamp
/// region the gradient is zero, which floors the reachable loss at about
/// 4.5e-4 rad.
GeodesicLoss geodesic_rotation_loss(const Mat3& r_hat, const Mat3& r_gt);

struct PoseLossResult {
  LossBreakdown breakdown;
  Vec3 d_u = Vec3::Zero();
  Vec3 d_v = Vec3::Zero();
  Vec3 d_t = Vec3::Zero();
};

/// Full pose objective: geodesic rotation term through Gram-Schmidt, L2
/// translation term, and the orthonormality regularizer
/// lambda * [<u,v>^2 + (|u|-1)^2 + (|v|-1)^2].
PoseLossResult pose_loss(const PoseParams6D& p_hat, const Mat3& r_gt,
                         const Vec3& t_gt, double lambda);

/// Same objective for the Euler variant (no (u, v) regularizer).
struct EulerLossResult {
  LossBreakdown breakdown;
  Vec3 d_theta = Vec3::Zero();
  Vec3 d_t = Vec3::Zero();
};

EulerLossResult euler_pose_loss(const EulerPoseParams& p_hat, const Mat3& r_gt,
                                const Vec3& t_gt);

struct LogTangentLossResult {
  double value = 0.0;
  Mat d_z_pred;
};

/// || LogEig(Z_pred) - LogEig(Z_gt) ||_F^2 on 4x4 SPD matrices.
LogTangentLossResult log_tangent_frobenius_loss(const Mat& z_pred,
                                                const Mat& z_gt);

}  // namespace covpose

#endif  // COVPOSE_LOSSES_HPP
