#include "covpose/synthetic.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace covpose {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSplatSigma = 1.2;  // px
constexpr int kQuantLevels = 65535;

double quantize16(double v) {
  const double clamped = std::min(std::max(v, 0.0), 1.0);
  return std::round(clamped * kQuantLevels) / kQuantLevels;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ToyObject ToyObject::default_object() {
  // Golden-angle spiral directions with strictly increasing radii, then
  // centered. Distinct centroid distances + full 3-D span rule out any
  // nontrivial rotational symmetry.
  ToyObject obj;
  const int n = 12;
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> raw;
  for (int k = 0; k < n; ++k) {
    const double z = 1.0 - 2.0 * (k + 0.5) / n;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * k;
    const double radius = 0.050 + 0.0075 * k;
    raw.emplace_back(radius * rho * std::cos(phi), radius * rho * std::sin(phi),
                     radius * z);
  }
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : raw) centroid += p;
  centroid /= double(n);
  for (const Vec3& p : raw) obj.points.push_back(p - centroid);

  for (int k = 0; k < n; ++k) obj.intensity.push_back(0.40 + 0.05 * k);

  for (std::size_t i = 0; i < obj.points.size(); ++i) {
    for (std::size_t j = i + 1; j < obj.points.size(); ++j) {
      obj.diameter = std::max(obj.diameter,
                              (obj.points[i] - obj.points[j]).norm());
    }
  }
  obj.validate();
  return obj;
}

void ToyObject::validate() const {
  require(points.size() >= 4, ErrorCode::InvalidInput,
          "toy object needs at least 4 points");
  require(points.size() == intensity.size(), ErrorCode::InvalidInput,
          "toy object intensity list size mismatch");

  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= double(points.size());

  // Non-coplanar: the centered point matrix must have full 3-D span.
  Mat centered(3, points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    centered.col(Eigen::Index(i)) = points[i] - centroid;
  }
  Eigen::JacobiSVD<Mat> svd(centered);
  require(svd.singularValues()(2) > 1e-4, ErrorCode::InvalidInput,
          "toy object points are (nearly) coplanar");

  // Asymmetry: pairwise distinct distances from the centroid mean any
  // self-mapping rotation must fix every point, i.e. be the identity.
  std::vector<double> radii;
  for (const Vec3& p : points) radii.push_back((p - centroid).norm());
  std::sort(radii.begin(), radii.end());
  for (std::size_t i = 1; i < radii.size(); ++i) {
    require(radii[i] - radii[i - 1] > 1e-3, ErrorCode::InvalidInput,
            "toy object has near-equal centroid radii");
  }
}

PoseSE3 sample_pose(Rng& rng, const TranslationBox& box) {
  // Uniform rotation via a normalized Gaussian quaternion.
  double q[4];
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& qi : q) {
      qi = rng.gaussian();
      norm2 += qi * qi;
    }
  } while (norm2 < 1e-12);
  const double inv = 1.0 / std::sqrt(norm2);
  const double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;

  PoseSE3 pose;
  pose.r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  for (int axis = 0; axis < 3; ++axis) {
    pose.t(axis) = rng.uniform(box.lo(axis), box.hi(axis));
  }
  return pose;
}

bool projection_in_frame(const ToyObject& obj, const PoseSE3& pose,
                         const CameraModel& cam) {
  for (const Vec3& p : obj.points) {
    const Vec3 pc = pose.r * p + pose.t;
    if (pc.z() <= 0.1) return false;
    const double u = cam.focal * pc.x() / pc.z() + cam.cx;
    const double v = cam.focal * pc.y() / pc.z() + cam.cy;
    if (u < 0.0 || u > cam.image_size - 1 || v < 0.0 ||
        v > cam.image_size - 1) {
      return false;
    }
  }
  return true;
}

Mat render(const ToyObject& obj, const PoseSE3& pose, const CameraModel& cam) {
  Mat image = Mat::Zero(cam.image_size, cam.image_size);
  const double inv_two_sigma2 = 1.0 / (2.0 * kSplatSigma * kSplatSigma);
  const int window = int(std::ceil(4.0 * kSplatSigma));

  for (std::size_t k = 0; k < obj.points.size(); ++k) {
    const Vec3 pc = pose.r * obj.points[k] + pose.t;
    if (pc.z() <= 0.1) continue;
    const double u = cam.focal * pc.x() / pc.z() + cam.cx;
    const double v = cam.focal * pc.y() / pc.z() + cam.cy;

    const int x0 = std::max(0, int(std::floor(u)) - window);
    const int x1 = std::min(cam.image_size - 1, int(std::ceil(u)) + window);
    const int y0 = std::max(0, int(std::floor(v)) - window);
    const int y1 = std::min(cam.image_size - 1, int(std::ceil(v)) + window);
    for (int yi = y0; yi <= y1; ++yi) {
      for (int xi = x0; xi <= x1; ++xi) {
        const double d2 = (xi - u) * (xi - u) + (yi - v) * (yi - v);
        image(yi, xi) += obj.intensity[k] * std::exp(-d2 * inv_two_sigma2);
      }
    }
  }

  for (Eigen::Index i = 0; i < image.size(); ++i) {
    image(i) = quantize16(image(i));
  }
  return image;
}

namespace {

SyntheticSample make_sample(int id, const Rng& master, const ToyObject& obj,
                            const CameraModel& cam, const TranslationBox& box) {
  Rng rng = master.derive(std::uint64_t(id));
  PoseSE3 pose;
  bool ok = false;
  for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
    pose = sample_pose(rng, box);
    ok = projection_in_frame(obj, pose, cam);
  }
  require(ok, ErrorCode::InvalidInput,
          "could not sample an in-frame pose; translation box too large");
  SyntheticSample s;
  s.id = id;
  s.pose_gt = pose;
  s.image = render(obj, pose, cam);
  return s;
}

}  // namespace

Dataset generate_dataset(const DatasetConfig& cfg) {
  require(cfg.n_train >= 1 && cfg.n_val >= 0 && cfg.n_test >= 0,
          ErrorCode::InvalidInput, "generate_dataset: bad split sizes");
  Dataset ds;
  ds.object = ToyObject::default_object();
  const Rng master(cfg.seed);

  int id = 0;
  for (int i = 0; i < cfg.n_train; ++i) {
    ds.train.push_back(make_sample(id++, master, ds.object, ds.camera, ds.box));
  }
  for (int i = 0; i < cfg.n_val; ++i) {
    ds.val.push_back(make_sample(id++, master, ds.object, ds.camera, ds.box));
  }
  for (int i = 0; i < cfg.n_test; ++i) {
    ds.test.push_back(make_sample(id++, master, ds.object, ds.camera, ds.box));
  }

  std::vector<Vec3> train_t;
  for (const SyntheticSample& s : ds.train) train_t.push_back(s.pose_gt.t);
  ds.stats = compute_translation_stats(train_t);
  return ds;
}

double se3_distance(const PoseSE3& p1, const PoseSE3& p2, double scale) {
  require(scale > 0.0, ErrorCode::InvalidInput,
          "se3_distance: scale must be > 0");
  const double arg =
      std::min(1.0, std::max(-1.0, ((p1.r.transpose() * p2.r).trace() - 1.0) / 2.0));
  const double theta = std::acos(arg);
  const double trans = (p1.t - p2.t).norm() / scale;
  return std::sqrt(theta * theta + trans * trans);
}

// --- persistence ---

void write_pgm16(const std::string& path, const Mat& image) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IoError, "cannot open " + path);
  out << "P5\n" << image.cols() << " " << image.rows() << "\n" << kQuantLevels
      << "\n";
  for (Eigen::Index y = 0; y < image.rows(); ++y) {
    for (Eigen::Index x = 0; x < image.cols(); ++x) {
      const int v = int(std::lround(image(y, x) * kQuantLevels));
      const unsigned char hi = (v >> 8) & 0xff;
      const unsigned char lo = v & 0xff;
      out.put(char(hi));
      out.put(char(lo));
    }
  }
  require(out.good(), ErrorCode::IoError, "failed writing " + path);
}

Mat read_pgm16(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  require(magic == "P5" && maxval == kQuantLevels && w > 0 && h > 0,
          ErrorCode::IoError, "unsupported image format in " + path);
  in.get();  // single whitespace after maxval
  Mat image(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int hi = in.get();
      const int lo = in.get();
      require(hi >= 0 && lo >= 0, ErrorCode::IoError,
              "truncated image " + path);
      image(y, x) = double((hi << 8) | lo) / kQuantLevels;
    }
  }
  return image;
}

namespace {

void write_manifest(const std::string& path,
                    const std::vector<SyntheticSample>& split) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot open " + path);
  for (const SyntheticSample& s : split) {
    out << s.id;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        out << " " << format_double(s.pose_gt.r(i, j));
      }
    }
    for (int i = 0; i < 3; ++i) out << " " << format_double(s.pose_gt.t(i));
    out << "\n";
  }
  require(out.good(), ErrorCode::IoError, "failed writing " + path);
}

std::vector<SyntheticSample> read_manifest(const std::string& path,
                                           const std::string& image_dir) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoError, "cannot open " + path);
  std::vector<SyntheticSample> split;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    SyntheticSample s;
    ls >> s.id;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) ls >> s.pose_gt.r(i, j);
    }
    for (int i = 0; i < 3; ++i) ls >> s.pose_gt.t(i);
    require(!ls.fail(), ErrorCode::IoError, "malformed manifest line in " + path);
    s.image = read_pgm16(image_dir + "/" + std::to_string(s.id) + ".pgm");
    split.push_back(std::move(s));
  }
  return split;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir + "/images", ec);
  require(!ec, ErrorCode::IoError, "cannot create dataset directory " + dir);

  write_manifest(dir + "/manifest_train.txt", ds.train);
  write_manifest(dir + "/manifest_val.txt", ds.val);
  write_manifest(dir + "/manifest_test.txt", ds.test);

  for (const auto* split : {&ds.train, &ds.val, &ds.test}) {
    for (const SyntheticSample& s : *split) {
      write_pgm16(dir + "/images/" + std::to_string(s.id) + ".pgm", s.image);
    }
  }

  std::ofstream stats(dir + "/stats.txt");
  require(stats.good(), ErrorCode::IoError, "cannot write stats.txt");
  stats << "t_min_x = " << format_double(ds.stats.t_min.x()) << "\n"
        << "t_min_y = " << format_double(ds.stats.t_min.y()) << "\n"
        << "t_min_z = " << format_double(ds.stats.t_min.z()) << "\n"
        << "t_range_x = " << format_double(ds.stats.t_range.x()) << "\n"
        << "t_range_y = " << format_double(ds.stats.t_range.y()) << "\n"
        << "t_range_z = " << format_double(ds.stats.t_range.z()) << "\n";

  std::ofstream meta(dir + "/meta.txt");
  require(meta.good(), ErrorCode::IoError, "cannot write meta.txt");
  meta << "focal = " << format_double(ds.camera.focal) << "\n"
       << "cx = " << format_double(ds.camera.cx) << "\n"
       << "cy = " << format_double(ds.camera.cy) << "\n"
       << "image_size = " << ds.camera.image_size << "\n"
       << "box_lo = " << format_double(ds.box.lo.x()) << " "
       << format_double(ds.box.lo.y()) << " " << format_double(ds.box.lo.z())
       << "\n"
       << "box_hi = " << format_double(ds.box.hi.x()) << " "
       << format_double(ds.box.hi.y()) << " " << format_double(ds.box.hi.z())
       << "\n"
       << "diameter = " << format_double(ds.object.diameter) << "\n"
       << "points = " << ds.object.points.size() << "\n";
  for (std::size_t i = 0; i < ds.object.points.size(); ++i) {
    const Vec3& p = ds.object.points[i];
    meta << format_double(p.x()) << " " << format_double(p.y()) << " "
         << format_double(p.z()) << " " << format_double(ds.object.intensity[i])
         << "\n";
  }
}

namespace {

TranslationStats read_stats_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoError, "cannot open " + path);
  TranslationStats stats;
  std::string key, eq;
  double value;
  int seen = 0;
  while (in >> key >> eq >> value) {
    if (key == "t_min_x") stats.t_min.x() = value;
    else if (key == "t_min_y") stats.t_min.y() = value;
    else if (key == "t_min_z") stats.t_min.z() = value;
    else if (key == "t_range_x") stats.t_range.x() = value;
    else if (key == "t_range_y") stats.t_range.y() = value;
    else if (key == "t_range_z") stats.t_range.z() = value;
    else continue;
    ++seen;
  }
  require(seen == 6, ErrorCode::IoError, "incomplete stats file " + path);
  return stats;
}

}  // namespace

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  const std::string image_dir = dir + "/images";
  ds.train = read_manifest(dir + "/manifest_train.txt", image_dir);
  ds.val = read_manifest(dir + "/manifest_val.txt", image_dir);
  ds.test = read_manifest(dir + "/manifest_test.txt", image_dir);
  ds.stats = read_stats_file(dir + "/stats.txt");

  std::ifstream meta(dir + "/meta.txt");
  require(meta.good(), ErrorCode::IoError, "cannot open meta.txt in " + dir);
  std::string key, eq;
  int n_points = 0;
  while (meta >> key >> eq) {
    if (key == "focal") meta >> ds.camera.focal;
    else if (key == "cx") meta >> ds.camera.cx;
    else if (key == "cy") meta >> ds.camera.cy;
    else if (key == "image_size") meta >> ds.camera.image_size;
    else if (key == "box_lo") meta >> ds.box.lo.x() >> ds.box.lo.y() >> ds.box.lo.z();
    else if (key == "box_hi") meta >> ds.box.hi.x() >> ds.box.hi.y() >> ds.box.hi.z();
    else if (key == "diameter") meta >> ds.object.diameter;
    else if (key == "points") {
      meta >> n_points;
      for (int i = 0; i < n_points; ++i) {
        Vec3 p;
        double a;
        meta >> p.x() >> p.y() >> p.z() >> a;
        ds.object.points.push_back(p);
        ds.object.intensity.push_back(a);
      }
    }
  }
  require(!ds.object.points.empty(), ErrorCode::IoError,
          "meta.txt carries no object points");
  return ds;
}

std::uint64_t dataset_hash(const Dataset& ds) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  auto mix = [&h](double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 1099511628211ULL;
    }
  };
  for (const auto* split : {&ds.train, &ds.val, &ds.test}) {
    for (const SyntheticSample& s : *split) {
      mix(double(s.id));
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) mix(s.pose_gt.r(i, j));
        mix(s.pose_gt.t(i));
      }
      for (Eigen::Index i = 0; i < s.image.size(); ++i) mix(s.image(i));
    }
  }
  return h;
}

}  // namespace covpose
