#include "covpose/pose_codec.hpp"

#include <Eigen/Geometry>

#include "covpose/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace covpose {

namespace {

constexpr double kGramSchmidtEps = 1e-8;
constexpr double kExpGuard = 50.0;

double percentile(std::vector<double> values, double fraction) {
  std::sort(values.begin(), values.end());
  const double rank = fraction * double(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  const double w = rank - double(lo);
  return (1.0 - w) * values[lo] + w * values[hi];
}

}  // namespace

CholeskyPoseFactor build_factor(const PoseParams6D& p) {
  require(p.u.allFinite() && p.v.allFinite() && p.t.allFinite(),
          ErrorCode::InvalidInput, "build_factor: non-finite parameters");
  require(p.t.cwiseAbs().maxCoeff() <= kExpGuard, ErrorCode::Overflow,
          "build_factor: |t| exceeds the exp guard");

  CholeskyPoseFactor f;
  Eigen::Matrix4d& l = f.l;
  l.setZero();
  l(0, 0) = std::exp(p.t.x());
  l(1, 1) = std::exp(p.t.y());
  l(2, 2) = std::exp(p.t.z());
  l(3, 3) = std::exp(-(p.t.x() + p.t.y() + p.t.z()));
  l(1, 0) = p.u(0);
  l(2, 0) = p.u(1);
  l(3, 0) = p.u(2);
  l(2, 1) = p.v(0);
  l(3, 1) = p.v(1);
  l(3, 2) = p.v(2);
  return f;
}

Mat encode_pose_to_spd(const PoseParams6D& p) {
  const CholeskyPoseFactor f = build_factor(p);
  return f.l * f.l.transpose();
}

PoseParams6D decode_spd_to_params(const Mat& s) {
  require(s.rows() == 4 && s.cols() == 4, ErrorCode::InvalidInput,
          "decode_spd_to_params expects a 4x4 matrix");
  const Mat l = cholesky_lower(s);
  PoseParams6D p;
  p.t = Vec3(std::log(l(0, 0)), std::log(l(1, 1)), std::log(l(2, 2)));
  p.u = Vec3(l(1, 0), l(2, 0), l(3, 0));
  p.v = Vec3(l(2, 1), l(3, 1), l(3, 2));
  return p;
}

Mat decode_spd_to_params_backward(const Mat& s, const PoseParams6D& d_params) {
  require(s.rows() == 4 && s.cols() == 4, ErrorCode::InvalidInput,
          "decode_spd_to_params_backward expects a 4x4 matrix");
  const Mat l = cholesky_lower(s);
  Mat d_l = Mat::Zero(4, 4);
  d_l(0, 0) = d_params.t.x() / l(0, 0);
  d_l(1, 1) = d_params.t.y() / l(1, 1);
  d_l(2, 2) = d_params.t.z() / l(2, 2);
  d_l(1, 0) = d_params.u(0);
  d_l(2, 0) = d_params.u(1);
  d_l(3, 0) = d_params.u(2);
  d_l(2, 1) = d_params.v(0);
  d_l(3, 1) = d_params.v(1);
  d_l(3, 2) = d_params.v(2);
  return cholesky_backward(l, d_l);
}

Mat3 gram_schmidt_so3(const Vec3& u, const Vec3& v) {
  require(u.allFinite() && v.allFinite(), ErrorCode::InvalidInput,
          "gram_schmidt_so3: non-finite input");
  const double nu = u.norm();
  require(nu >= kGramSchmidtEps, ErrorCode::DegenerateRotation,
          "gram_schmidt_so3: first vector vanishes");
  require(v.norm() >= kGramSchmidtEps, ErrorCode::DegenerateRotation,
          "gram_schmidt_so3: second vector vanishes");
  require(u.cross(v).norm() >= kGramSchmidtEps * nu * v.norm(),
          ErrorCode::DegenerateRotation,
          "gram_schmidt_so3: input vectors are collinear");

  const Vec3 r1 = u / nu;
  const Vec3 w = v - r1.dot(v) * r1;
  const Vec3 r2 = w / w.norm();
  const Vec3 r3 = r1.cross(r2);
  Mat3 r;
  r.col(0) = r1;
  r.col(1) = r2;
  r.col(2) = r3;
  return r;
}

GramSchmidtGrads gram_schmidt_backward(const Vec3& u, const Vec3& v,
                                       const Mat3& d_r) {
  const double nu = u.norm();
  require(nu >= kGramSchmidtEps, ErrorCode::DegenerateRotation,
          "gram_schmidt_backward: first vector vanishes");
  require(u.cross(v).norm() >= kGramSchmidtEps * nu * v.norm() &&
              v.norm() >= kGramSchmidtEps,
          ErrorCode::DegenerateRotation,
          "gram_schmidt_backward: input vectors are collinear");
  const Vec3 r1 = u / nu;
  const Vec3 w = v - r1.dot(v) * r1;
  const double nw = w.norm();
  const Vec3 r2 = w / nw;

  Vec3 d_r1 = d_r.col(0);
  Vec3 d_r2 = d_r.col(1);
  const Vec3 d_r3 = d_r.col(2);

  // r3 = r1 x r2.
  d_r1 += r2.cross(d_r3);
  d_r2 += d_r3.cross(r1);

  // r2 = w / |w|.
  const Vec3 d_w = (d_r2 - r2 * r2.dot(d_r2)) / nw;

  // w = v - (r1 . v) r1.
  const Vec3 d_v = d_w - r1 * r1.dot(d_w);
  d_r1 += -v * r1.dot(d_w) - d_w * r1.dot(v);

  // r1 = u / |u|.
  const Vec3 d_u = (d_r1 - r1 * r1.dot(d_r1)) / nu;

  return {d_u, d_v};
}

Vec3 normalize_translation(const Vec3& t_raw, const TranslationStats& stats) {
  require(stats.t_range.minCoeff() > 0.0, ErrorCode::InvalidInput,
          "normalize_translation: nonpositive range");
  return (t_raw - stats.t_min).cwiseQuotient(stats.t_range);
}

Vec3 denormalize_translation(const Vec3& t_norm, const TranslationStats& stats) {
  return t_norm.cwiseProduct(stats.t_range) + stats.t_min;
}

TranslationStats compute_translation_stats(
    const std::vector<Vec3>& translations) {
  require(!translations.empty(), ErrorCode::InvalidInput,
          "compute_translation_stats: empty input");
  TranslationStats stats;
  for (int axis = 0; axis < 3; ++axis) {
    std::vector<double> values;
    values.reserve(translations.size());
    for (const Vec3& t : translations) values.push_back(t(axis));
    const double lo = percentile(values, 0.01);
    const double hi = percentile(values, 0.99);
    stats.t_min(axis) = lo;
    stats.t_range(axis) = std::max(hi - lo, 1e-6);
  }
  return stats;
}

Eigen::Matrix3d build_factor_euler(const Vec3& theta, const Vec3& t) {
  require(theta.allFinite() && t.allFinite(), ErrorCode::InvalidInput,
          "build_factor_euler: non-finite parameters");
  require(theta.cwiseAbs().maxCoeff() <= kExpGuard, ErrorCode::Overflow,
          "build_factor_euler: |theta| exceeds the exp guard");
  Eigen::Matrix3d l = Eigen::Matrix3d::Zero();
  l(0, 0) = std::exp(theta.x());
  l(1, 1) = std::exp(theta.y());
  l(2, 2) = std::exp(theta.z());
  l(1, 0) = t.x();
  l(2, 0) = t.y();
  l(2, 1) = t.z();
  return l;
}

EulerPoseParams decode_euler(const Mat& s) {
  require(s.rows() == 3 && s.cols() == 3, ErrorCode::InvalidInput,
          "decode_euler expects a 3x3 matrix");
  const Mat l = cholesky_lower(s);
  EulerPoseParams p;
  p.theta = Vec3(std::log(l(0, 0)), std::log(l(1, 1)), std::log(l(2, 2)));
  p.t = Vec3(l(1, 0), l(2, 0), l(2, 1));
  return p;
}

Mat decode_euler_backward(const Mat& s, const EulerPoseParams& d_params) {
  const Mat l = cholesky_lower(s);
  Mat d_l = Mat::Zero(3, 3);
  d_l(0, 0) = d_params.theta.x() / l(0, 0);
  d_l(1, 1) = d_params.theta.y() / l(1, 1);
  d_l(2, 2) = d_params.theta.z() / l(2, 2);
  d_l(1, 0) = d_params.t.x();
  d_l(2, 0) = d_params.t.y();
  d_l(2, 1) = d_params.t.z();
  return cholesky_backward(l, d_l);
}

namespace {

Mat3 rot_x(double a) {
  Mat3 r;
  r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return r;
}

Mat3 rot_y(double a) {
  Mat3 r;
  r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return r;
}

Mat3 rot_z(double a) {
  Mat3 r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return r;
}

Mat3 d_rot_x(double a) {
  Mat3 r;
  r << 0, 0, 0, 0, -std::sin(a), -std::cos(a), 0, std::cos(a), -std::sin(a);
  return r;
}

Mat3 d_rot_y(double a) {
  Mat3 r;
  r << -std::sin(a), 0, std::cos(a), 0, 0, 0, -std::cos(a), 0, -std::sin(a);
  return r;
}

Mat3 d_rot_z(double a) {
  Mat3 r;
  r << -std::sin(a), -std::cos(a), 0, std::cos(a), -std::sin(a), 0, 0, 0, 0;
  return r;
}

}  // namespace

Mat3 euler_to_rotation(const Vec3& theta) {
  require(theta.allFinite(), ErrorCode::InvalidInput,
          "euler_to_rotation: non-finite angles");
  return rot_z(theta.z()) * rot_y(theta.y()) * rot_x(theta.x());
}

Vec3 euler_to_rotation_backward(const Vec3& theta, const Mat3& d_r) {
  const Mat3 rx = rot_x(theta.x());
  const Mat3 ry = rot_y(theta.y());
  const Mat3 rz = rot_z(theta.z());
  Vec3 g;
  g.x() = (d_r.cwiseProduct(rz * ry * d_rot_x(theta.x()))).sum();
  g.y() = (d_r.cwiseProduct(rz * d_rot_y(theta.y()) * rx)).sum();
  g.z() = (d_r.cwiseProduct(d_rot_z(theta.z()) * ry * rx)).sum();
  return g;
}

}  // namespace covpose
