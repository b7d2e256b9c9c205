#include "covpose/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace covpose {

namespace {

constexpr char kMagic[8] = {'C', 'V', 'P', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = (v >> (8 * i)) & 0xff;
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  require(bool(is), ErrorCode::IoError, "truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

double get_f64(std::istream& is) {
  const std::uint64_t bits = get_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), std::streamsize(s.size()));
}

std::string get_string(std::istream& is) {
  const std::uint64_t n = get_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), std::streamsize(n));
  require(bool(is), ErrorCode::IoError, "truncated checkpoint string");
  return s;
}

void put_vec(std::ostream& os, const Vec& v) {
  put_u64(os, std::uint64_t(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(os, v(i));
}

Vec get_vec(std::istream& is) {
  const std::uint64_t n = get_u64(is);
  Vec v;
  v.resize(Eigen::Index(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = get_f64(is);
  return v;
}

void put_mat(std::ostream& os, const Mat& m) {
  put_u64(os, std::uint64_t(m.rows()));
  put_u64(os, std::uint64_t(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) put_f64(os, m(i, j));
  }
}

Mat get_mat(std::istream& is) {
  const auto rows = Eigen::Index(get_u64(is));
  const auto cols = Eigen::Index(get_u64(is));
  Mat m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = get_f64(is);
  }
  return m;
}

std::string stats_to_text(const TranslationStats& s) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "t_min_x = %.17g\nt_min_y = %.17g\nt_min_z = %.17g\n"
                "t_range_x = %.17g\nt_range_y = %.17g\nt_range_z = %.17g\n",
                s.t_min.x(), s.t_min.y(), s.t_min.z(), s.t_range.x(),
                s.t_range.y(), s.t_range.z());
  return buf;
}

TranslationStats stats_from_text(const std::string& text) {
  TranslationStats s;
  double v[6];
  const int matched = std::sscanf(
      text.c_str(),
      "t_min_x = %lf\nt_min_y = %lf\nt_min_z = %lf\n"
      "t_range_x = %lf\nt_range_y = %lf\nt_range_z = %lf\n",
      &v[0], &v[1], &v[2], &v[3], &v[4], &v[5]);
  require(matched == 6, ErrorCode::IoError,
          "checkpoint translation stats are malformed");
  s.t_min = Vec3(v[0], v[1], v[2]);
  s.t_range = Vec3(v[3], v[4], v[5]);
  return s;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), ErrorCode::IoError, "cannot open checkpoint " + path);

  os.write(kMagic, 8);
  put_u64(os, ckpt.version);
  put_string(os, ckpt.config_text);
  put_u64(os, std::uint64_t(ckpt.epoch));
  put_u64(os, std::uint64_t(ckpt.global_step));
  put_f64(os, ckpt.best_val);

  put_vec(os, ckpt.euclidean_params);
  put_u64(os, ckpt.bimap_weights.size());
  for (const Mat& w : ckpt.bimap_weights) put_mat(os, w);

  put_f64(os, ckpt.adam.lr);
  put_f64(os, ckpt.adam.beta1);
  put_f64(os, ckpt.adam.beta2);
  put_f64(os, ckpt.adam.eps);
  put_u64(os, std::uint64_t(ckpt.adam.step));
  put_vec(os, ckpt.adam.m);
  put_vec(os, ckpt.adam.v);

  put_f64(os, ckpt.lr_stiefel);
  put_f64(os, ckpt.scheduler.factor);
  put_u64(os, std::uint64_t(ckpt.scheduler.patience));
  put_f64(os, ckpt.scheduler.min_delta);
  put_f64(os, ckpt.scheduler.best);
  put_u64(os, std::uint64_t(ckpt.scheduler.epochs_since_improvement));

  put_string(os, stats_to_text(ckpt.stats));
  put_string(os, ckpt.rng_state);

  require(os.good(), ErrorCode::IoError, "failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), ErrorCode::IoError, "cannot open checkpoint " + path);

  char magic[8];
  is.read(magic, 8);
  require(bool(is) && std::memcmp(magic, kMagic, 8) == 0, ErrorCode::IoError,
          "not a checkpoint file: " + path);

  Checkpoint ckpt;
  ckpt.version = std::uint32_t(get_u64(is));
  require(ckpt.version == 1, ErrorCode::IoError,
          "unsupported checkpoint version");
  ckpt.config_text = get_string(is);
  ckpt.epoch = (long long)(get_u64(is));
  ckpt.global_step = (long long)(get_u64(is));
  ckpt.best_val = get_f64(is);

  ckpt.euclidean_params = get_vec(is);
  const std::uint64_t n_w = get_u64(is);
  for (std::uint64_t i = 0; i < n_w; ++i) {
    ckpt.bimap_weights.push_back(get_mat(is));
  }

  ckpt.adam.lr = get_f64(is);
  ckpt.adam.beta1 = get_f64(is);
  ckpt.adam.beta2 = get_f64(is);
  ckpt.adam.eps = get_f64(is);
  ckpt.adam.step = (long long)(get_u64(is));
  ckpt.adam.m = get_vec(is);
  ckpt.adam.v = get_vec(is);

  ckpt.lr_stiefel = get_f64(is);
  ckpt.scheduler.factor = get_f64(is);
  ckpt.scheduler.patience = int(get_u64(is));
  ckpt.scheduler.min_delta = get_f64(is);
  ckpt.scheduler.best = get_f64(is);
  ckpt.scheduler.epochs_since_improvement = int(get_u64(is));

  ckpt.stats = stats_from_text(get_string(is));
  ckpt.rng_state = get_string(is);
  return ckpt;
}

}  // namespace covpose
