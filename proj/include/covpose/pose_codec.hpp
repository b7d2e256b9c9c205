#ifndef COVPOSE_POSE_CODEC_HPP
#define COVPOSE_POSE_CODEC_HPP

#include "covpose/common.hpp"

#include <vector>

namespace covpose {

/// Continuous pose parameters: two 3-vectors spanning the rotation (mapped
/// to SO(3) by Gram-Schmidt plus a cross product) and a translation in the
/// normalized training space.
struct PoseParams6D {
  Vec3 u = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 t = Vec3::Zero();
};

/// Structured 4x4 lower-triangular factor carrying (u, v, t). The diagonal
/// is (e^tx, e^ty, e^tz, e^-(tx+ty+tz)), so the diagonal product is 1 and
/// det(L L^T) = 1: the geometric mean of the SPD eigenvalues is normalized.
struct CholeskyPoseFactor {
  Eigen::Matrix4d l = Eigen::Matrix4d::Identity();
};

struct PoseSE3 {
  Mat3 r = Mat3::Identity();
  Vec3 t = Vec3::Zero();  // meters
};

/// Per-axis robust normalization statistics estimated on the training split.
struct TranslationStats {
  Vec3 t_min = Vec3::Zero();
  Vec3 t_range = Vec3::Ones();
};

CholeskyPoseFactor build_factor(const PoseParams6D& p);

/// L L^T for the structured factor: a unit-determinant 4x4 SPD matrix.
Mat encode_pose_to_spd(const PoseParams6D& p);

/// Reads the pose parameters back off the Cholesky factor of S. Exact
/// inverse of encode_pose_to_spd up to floating point.
PoseParams6D decode_spd_to_params(const Mat& s);

/// Adjoint of decode_spd_to_params: routes (du, dv, dt) through the factor
/// entries and the Cholesky factorization back to the SPD input.
Mat decode_spd_to_params_backward(const Mat& s, const PoseParams6D& d_params);

/// Orthonormalizes (u, v) and completes the basis with the cross product.
/// Throws DegenerateRotation when u vanishes or u, v are collinear.
Mat3 gram_schmidt_so3(const Vec3& u, const Vec3& v);

struct GramSchmidtGrads {
  Vec3 d_u;
  Vec3 d_v;
};

GramSchmidtGrads gram_schmidt_backward(const Vec3& u, const Vec3& v,
                                       const Mat3& d_r);

Vec3 normalize_translation(const Vec3& t_raw, const TranslationStats& stats);
Vec3 denormalize_translation(const Vec3& t_norm, const TranslationStats& stats);

/// Robust per-axis statistics: t_min at the 1st percentile, t_range the
/// 1st-to-99th percentile span, floored at 1e-6 m.
TranslationStats compute_translation_stats(const std::vector<Vec3>& translations);

// --- Euler-angle variant (3x3 factor) ---

struct EulerPoseParams {
  Vec3 theta = Vec3::Zero();  // radians
  Vec3 t = Vec3::Zero();
};

Eigen::Matrix3d build_factor_euler(const Vec3& theta, const Vec3& t);
EulerPoseParams decode_euler(const Mat& s);
Mat decode_euler_backward(const Mat& s, const EulerPoseParams& d_params);

/// Extrinsic ZYX convention: R = Rz(theta_z) * Ry(theta_y) * Rx(theta_x).
Mat3 euler_to_rotation(const Vec3& theta);
Vec3 euler_to_rotation_backward(const Vec3& theta, const Mat3& d_r);

}  // namespace covpose

#endif  // COVPOSE_POSE_CODEC_HPP
