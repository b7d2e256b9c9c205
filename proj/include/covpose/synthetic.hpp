#ifndef COVPOSE_SYNTHETIC_HPP
#define COVPOSE_SYNTHETIC_HPP

#include "covpose/common.hpp"
#include "covpose/pose_codec.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace covpose {

/// Fixed point model rendered into the synthetic images. The default object
/// is asymmetric by construction: its points have pairwise distinct radii
/// from the centroid and span all of 3-D, so no nontrivial rotation maps the
/// set onto itself.
struct ToyObject {
  std::vector<Vec3> points;       // meters, object frame
  std::vector<double> intensity;  // per-point splat amplitude in (0, 1]
  double diameter = 0.0;          // max pairwise distance

  static ToyObject default_object();
  void validate() const;
};

struct CameraModel {
  double focal = 50.0;            // pixels
  double cx = 15.5;
  double cy = 15.5;
  int image_size = 32;
};

// Close-range box: at ~0.5 m the 0.26 m object subtends strong perspective,
// so per-point depth is visible through foreshortening.
struct TranslationBox {
  Vec3 lo = Vec3(-0.03, -0.03, 0.42);
  Vec3 hi = Vec3(0.03, 0.03, 0.58);

  Vec3 extent() const { return hi - lo; }
};

struct SyntheticSample {
  int id = 0;
  Mat image;  // image_size x image_size, values in [0, 1]
  PoseSE3 pose_gt;
};

struct Dataset {
  std::vector<SyntheticSample> train;
  std::vector<SyntheticSample> val;
  std::vector<SyntheticSample> test;
  TranslationStats stats;  // computed on the training split only
  ToyObject object;
  CameraModel camera;
  TranslationBox box;
};

/// Uniform rotation (random quaternion) and box-uniform translation.
PoseSE3 sample_pose(Rng& rng, const TranslationBox& box);

/// Pinhole projection of the transformed points, each splatted as a
/// Gaussian blob (sigma = 1.2 px) with its fixed intensity; clamped to
/// [0, 1] and quantized to 16-bit levels so disk round trips are exact.
Mat render(const ToyObject& obj, const PoseSE3& pose, const CameraModel& cam);

/// True when every projected point center lies inside the image frame.
bool projection_in_frame(const ToyObject& obj, const PoseSE3& pose,
                         const CameraModel& cam);

struct DatasetConfig {
  int n_train = 2000;
  int n_val = 200;
  int n_test = 500;
  std::uint64_t seed = 7;
};

Dataset generate_dataset(const DatasetConfig& cfg);

/// Mixed SE(3) distance: sqrt(theta^2 + (|t1 - t2| / scale)^2) with theta
/// the geodesic rotation angle. The default scale is the object diameter.
double se3_distance(const PoseSE3& p1, const PoseSE3& p2, double scale);

// --- persistence ---

void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

void write_pgm16(const std::string& path, const Mat& image);
Mat read_pgm16(const std::string& path);

std::uint64_t dataset_hash(const Dataset& ds);

}  // namespace covpose

#endif  // COVPOSE_SYNTHETIC_HPP
