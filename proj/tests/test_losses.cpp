#include "covpose/losses.hpp"

#include "covpose/pose_codec.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace covpose;
using namespace testsupport;

namespace {

Mat3 rot_z(double a) {
  Mat3 r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return r;
}

Mat3 random_rotation(Rng& rng) {
  const Vec3 u(rng.gaussian(), rng.gaussian(), rng.gaussian());
  const Vec3 v(rng.gaussian(), rng.gaussian(), rng.gaussian());
  return gram_schmidt_so3(u, v);
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("geodesic_rotation_loss reference values") {
  Rng rng(61);
  const Mat3 r = random_rotation(rng);

  // identical rotations: clamp floors the loss near (but not at) zero
  CHECK(geodesic_rotation_loss(r, r).value <= 1e-3);

  // tr(Rz(pi)) = -1 so the relative trace argument is -1 -> pi, up to the
  // clamp floor of sqrt(2 * 1e-7)
  CHECK(std::abs(geodesic_rotation_loss(r * rot_z(kPi), r).value - kPi) <
        1e-3);

  // tr(Rz(pi/2)) = 1 -> arccos(0) = pi/2
  CHECK(geodesic_rotation_loss(r * rot_z(kPi / 2.0), r).value ==
        doctest::Approx(kPi / 2.0));
}

TEST_CASE("geodesic_rotation_loss rejects non-rotations") {
  Mat3 bad = Mat3::Identity();
  bad(0, 0) = 2.0;
  CHECK_THROWS_AS((void)geodesic_rotation_loss(bad, Mat3::Identity()), Error);
  Mat3 reflect = Mat3::Identity();
  reflect(2, 2) = -1.0;  // det -1
  CHECK_THROWS_AS((void)geodesic_rotation_loss(reflect, Mat3::Identity()),
                  Error);
}

TEST_CASE("geodesic gradient matches finite differences away from the clamp") {
  Rng rng(62);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat3 r_gt = random_rotation(rng);
    Vec3 u(rng.gaussian(), rng.gaussian(), rng.gaussian());
    Vec3 v(rng.gaussian(), rng.gaussian(), rng.gaussian());
    const Mat3 r_hat = gram_schmidt_so3(u, v);
    const GeodesicLoss geo = geodesic_rotation_loss(r_hat, r_gt);
    if (geo.value < 1e-2 || geo.value > kPi - 1e-2) continue;

    auto loss = [&]() {
      return geodesic_rotation_loss(gram_schmidt_so3(u, v), r_gt).value;
    };
    const GramSchmidtGrads g = gram_schmidt_backward(u, v, geo.d_r_hat);
    for (int i = 0; i < 3; ++i) {
      CHECK(rel_err(g.d_u(i), central_diff(loss, u(i))) < 1e-5);
      CHECK(rel_err(g.d_v(i), central_diff(loss, v(i))) < 1e-5);
    }
  }
}

TEST_CASE("pose_loss perfect prediction") {
  PoseParams6D p;
  p.u = Vec3(1, 0, 0);
  p.v = Vec3(0, 1, 0);
  p.t = Vec3(0.3, 0.4, 0.5);
  const PoseLossResult r = pose_loss(p, Mat3::Identity(), p.t, 1e-3);
  CHECK(r.breakdown.regularizer == doctest::Approx(0.0));
  CHECK(r.breakdown.translation_l2 == doctest::Approx(0.0));
  CHECK(r.breakdown.total <= 1e-3);
}

TEST_CASE("pose_loss scale hits only the regularizer") {
  PoseParams6D p;
  p.u = Vec3(2, 0, 0);  // rotation unchanged, |u| penalty = (2-1)^2
  p.v = Vec3(0, 1, 0);
  p.t = Vec3::Zero();
  const double lambda = 1e-3;
  const PoseLossResult r = pose_loss(p, Mat3::Identity(), Vec3::Zero(), lambda);
  CHECK(r.breakdown.regularizer == doctest::Approx(1.0));
  CHECK(r.breakdown.total - r.breakdown.rotation_geodesic ==
        doctest::Approx(lambda * 1.0));
  CHECK(r.breakdown.rotation_geodesic <= 1e-3);  // clamp floor only
}

TEST_CASE("pose_loss rotation term is invariant to positive rescaling") {
  Rng rng(63);
  PoseParams6D p;
  p.u = Vec3(0.7, -0.1, 0.3);
  p.v = Vec3(0.2, 0.9, -0.4);
  p.t = Vec3(0.1, 0.2, 0.3);
  const Mat3 r_gt = random_rotation(rng);
  const PoseLossResult base = pose_loss(p, r_gt, Vec3::Zero(), 1e-3);

  PoseParams6D scaled = p;
  scaled.u *= 3.0;
  scaled.v *= 0.5;
  const PoseLossResult s = pose_loss(scaled, r_gt, Vec3::Zero(), 1e-3);
  CHECK(s.breakdown.rotation_geodesic ==
        doctest::Approx(base.breakdown.rotation_geodesic));
  CHECK(s.breakdown.translation_l2 ==
        doctest::Approx(base.breakdown.translation_l2));
  CHECK(s.breakdown.regularizer != doctest::Approx(base.breakdown.regularizer));
}

TEST_CASE("pose_loss breakdown adds up and stays nonnegative") {
  Rng rng(64);
  for (int trial = 0; trial < 50; ++trial) {
    PoseParams6D p;
    for (int i = 0; i < 3; ++i) {
      p.u(i) = rng.gaussian();
      p.v(i) = rng.gaussian();
      p.t(i) = rng.gaussian();
    }
    if (p.u.cross(p.v).norm() < 1e-3) continue;
    const Mat3 r_gt = random_rotation(rng);
    const Vec3 t_gt(rng.gaussian(), rng.gaussian(), rng.gaussian());
    const PoseLossResult r = pose_loss(p, r_gt, t_gt, 1e-3);
    CHECK(r.breakdown.rotation_geodesic >= 0.0);
    CHECK(r.breakdown.translation_l2 >= 0.0);
    CHECK(r.breakdown.regularizer >= 0.0);
    CHECK(std::abs(r.breakdown.total -
                   (r.breakdown.rotation_geodesic +
                    r.breakdown.translation_l2 +
                    r.breakdown.lambda * r.breakdown.regularizer)) < 1e-12);
  }
}

TEST_CASE("pose_loss full gradient matches finite differences") {
  Rng rng(65);
  int checked = 0;
  for (int trial = 0; trial < 20 && checked < 8; ++trial) {
    PoseParams6D p;
    for (int i = 0; i < 3; ++i) {
      p.u(i) = rng.gaussian();
      p.v(i) = rng.gaussian();
      p.t(i) = rng.gaussian();
    }
    const Mat3 r_gt = random_rotation(rng);
    const Vec3 t_gt(rng.gaussian(), rng.gaussian(), rng.gaussian());
    if (p.u.cross(p.v).norm() < 1e-2) continue;
    const PoseLossResult r = pose_loss(p, r_gt, t_gt, 1e-3);
    if (r.breakdown.rotation_geodesic < 1e-2 ||
        r.breakdown.rotation_geodesic > kPi - 1e-2 ||
        r.breakdown.translation_l2 < 1e-3) {
      continue;
    }
    ++checked;
    auto loss = [&]() { return pose_loss(p, r_gt, t_gt, 1e-3).breakdown.total; };
    for (int i = 0; i < 3; ++i) {
      CHECK(rel_err(r.d_u(i), central_diff(loss, p.u(i))) < 1e-5);
      CHECK(rel_err(r.d_v(i), central_diff(loss, p.v(i))) < 1e-5);
      CHECK(rel_err(r.d_t(i), central_diff(loss, p.t(i))) < 1e-5);
    }
  }
  CHECK(checked >= 5);
}

TEST_CASE("euler_pose_loss gradient matches finite differences") {
  Rng rng(66);
  EulerPoseParams p;
  p.theta = Vec3(0.4, -0.8, 1.1);
  p.t = Vec3(0.2, 0.6, -0.1);
  const Mat3 r_gt = random_rotation(rng);
  const Vec3 t_gt(0.0, 0.1, 0.2);
  const EulerLossResult r = euler_pose_loss(p, r_gt, t_gt);
  REQUIRE(r.breakdown.rotation_geodesic > 1e-2);

  auto loss = [&]() { return euler_pose_loss(p, r_gt, t_gt).breakdown.total; };
  for (int i = 0; i < 3; ++i) {
    CHECK(rel_err(r.d_theta(i), central_diff(loss, p.theta(i))) < 1e-5);
    CHECK(rel_err(r.d_t(i), central_diff(loss, p.t(i))) < 1e-5);
  }
}

TEST_CASE("log_tangent_frobenius_loss values") {
  const Mat i4 = Mat::Identity(4, 4);
  CHECK(log_tangent_frobenius_loss(i4, i4).value == doctest::Approx(0.0));

  // diag(e^2, 1, 1, e^-2) vs I: ||diag(2,0,0,-2)||_F^2 = 8
  Mat z = Mat::Zero(4, 4);
  z(0, 0) = std::exp(2.0);
  z(1, 1) = 1.0;
  z(2, 2) = 1.0;
  z(3, 3) = std::exp(-2.0);
  CHECK(log_tangent_frobenius_loss(z, i4).value == doctest::Approx(8.0));
}

TEST_CASE("log_tangent_frobenius_loss gradient matches finite differences") {
  Rng rng(67);
  Mat z_pred = random_spd(4, rng, 0.4, 2.5);
  const Mat z_gt = random_spd(4, rng, 0.4, 2.5);
  auto loss = [&]() {
    return log_tangent_frobenius_loss(sym(z_pred), z_gt).value;
  };
  const Mat analytic = log_tangent_frobenius_loss(z_pred, z_gt).d_z_pred;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double fd = central_diff(loss, z_pred(i, j));
      CHECK(rel_err(analytic(i, j), fd) < 1e-5);
    }
  }
}

}  // TEST_SUITE
