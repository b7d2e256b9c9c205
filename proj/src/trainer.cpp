#include "covpose/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace covpose {

const char* kTrainLogHeader =
    "epoch,train_total,train_rot,train_trans,train_reg,train_logtan,"
    "val_total,val_rot,val_trans,val_reg,val_logtan,lr_adam,lr_stiefel,"
    "skipped";

namespace {

constexpr double kRadToDeg = 57.295779513082320877;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double rotation_angle_deg(const Mat3& r1, const Mat3& r2) {
  const double arg = std::min(
      1.0, std::max(-1.0, ((r1.transpose() * r2).trace() - 1.0) / 2.0));
  return std::acos(arg) * kRadToDeg;
}

}  // namespace

PoseSE3 predict_pose(const PoseModel& model, const Mat& image,
                     const TranslationStats& stats) {
  const ForwardResult fwd = model.forward(image);
  PoseSE3 pose;
  if (model.variant() == VariantId::LogTangent) {
    const PoseParams6D p = decode_spd_to_params(fwd.spd_code);
    pose.r = gram_schmidt_so3(p.u, p.v);
    pose.t = denormalize_translation(p.t, stats);
  } else {
    pose.r = fwd.r_hat;
    pose.t = denormalize_translation(fwd.t_hat_norm, stats);
  }
  return pose;
}

MetricReport evaluate_model(const PoseModel& model,
                            const std::vector<SyntheticSample>& split,
                            const TranslationStats& stats,
                            const ToyObject& object) {
  require(!split.empty(), ErrorCode::InvalidInput,
          "evaluate_model: empty split");
  std::vector<PerSampleMetrics> rows;
  rows.reserve(split.size());
  for (const SyntheticSample& s : split) {
    PoseSE3 pose_hat;
    try {
      pose_hat = predict_pose(model, s.image, stats);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DegenerateRotation) {
        throw Error(ErrorCode::DegenerateRotation,
                    "sample " + std::to_string(s.id) + ": " + e.what());
      }
      throw;
    }
    PerSampleMetrics m;
    m.id = s.id;
    m.add = add_metric(object.points, pose_hat, s.pose_gt);
    m.adds = adds_metric(object.points, pose_hat, s.pose_gt);
    m.rotation_error_deg = rotation_angle_deg(pose_hat.r, s.pose_gt.r);
    m.translation_error_m = (pose_hat.t - s.pose_gt.t).norm();
    rows.push_back(m);
  }
  return build_metric_report(rows, object.diameter);
}

Trainer::Trainer(const RunConfig& cfg, const Dataset& dataset)
    : cfg_(cfg), dataset_(dataset), shuffle_rng_(Rng(cfg.seed).derive(0x5f1e)) {
  cfg_.validate();
  const VariantId variant = variant_from_name(cfg_.variant);
  model_.init(backbone_config_from(cfg_), head_config_for_variant(cfg_, variant),
              variant, cfg_.seed);
  opt_.adam.lr = cfg_.lr_adam;
  opt_.adam.init(model_.euclidean_parameter_count());
  opt_.lr_stiefel = cfg_.lr_stiefel;
  scheduler_.factor = cfg_.factor;
  scheduler_.patience = cfg_.patience;

  std::error_code ec;
  std::filesystem::create_directories(cfg_.out_dir, ec);
  require(!ec, ErrorCode::IoError,
          "cannot create output directory " + cfg_.out_dir);
}

std::string Trainer::best_checkpoint_path() const {
  return cfg_.out_dir + "/best.ckpt";
}

std::string Trainer::last_checkpoint_path() const {
  return cfg_.out_dir + "/last.ckpt";
}

Checkpoint Trainer::make_checkpoint() const {
  Checkpoint ckpt;
  ckpt.config_text = serialize_config(cfg_);
  ckpt.epoch = epoch_done_;
  ckpt.global_step = global_step_;
  ckpt.best_val = best_val_;
  ckpt.euclidean_params = model_.flatten_euclidean();
  ckpt.bimap_weights = model_.bimap_weights();
  ckpt.adam = opt_.adam;
  ckpt.lr_stiefel = opt_.lr_stiefel;
  ckpt.scheduler = scheduler_;
  ckpt.stats = dataset_.stats;
  std::ostringstream rng;
  shuffle_rng_.save(rng);
  ckpt.rng_state = rng.str();
  return ckpt;
}

void Trainer::save_state(const std::string& path) const {
  save_checkpoint(make_checkpoint(), path);
}

void Trainer::load_weights(const Checkpoint& ckpt) {
  model_.unflatten_euclidean(ckpt.euclidean_params);
  model_.bimap_weights() = ckpt.bimap_weights;
}

void Trainer::resume_from(const std::string& checkpoint_path) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const RunConfig stored = parse_config(ckpt.config_text);
  require(stored == cfg_, ErrorCode::ConfigError,
          "checkpoint config does not match the run config");
  load_weights(ckpt);
  opt_.adam = ckpt.adam;
  opt_.lr_stiefel = ckpt.lr_stiefel;
  scheduler_ = ckpt.scheduler;
  epoch_done_ = ckpt.epoch;
  global_step_ = ckpt.global_step;
  best_val_ = ckpt.best_val;
  std::istringstream rng(ckpt.rng_state);
  shuffle_rng_.load(rng);
  append_logs_ = true;
}

double Trainer::epoch_train() {
  std::vector<std::size_t> order(dataset_.train.size());
  std::iota(order.begin(), order.end(), std::size_t(0));
  // Fisher-Yates with our own rng: std::shuffle's draw pattern is
  // implementation-defined, which would break the bit-exactness contract.
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = std::size_t(shuffle_rng_.bounded(i));
    std::swap(order[i - 1], order[j]);
  }

  std::ofstream trace;
  if (cfg_.step_trace) {
    trace.open(cfg_.out_dir + "/steps.csv", std::ios::app);
    require(trace.good(), ErrorCode::IoError, "cannot open steps.csv");
  }

  LossBreakdown sum;
  long long n_batches = 0;
  last_skipped_ = 0;
  for (std::size_t at = 0; at < order.size(); at += std::size_t(cfg_.batch_size)) {
    const std::size_t end =
        std::min(order.size(), at + std::size_t(cfg_.batch_size));
    std::vector<TrainBatchSample> batch;
    batch.reserve(end - at);
    for (std::size_t k = at; k < end; ++k) {
      const SyntheticSample& s = dataset_.train[order[k]];
      TrainBatchSample item;
      item.image = s.image;
      item.r_gt = s.pose_gt.r;
      item.t_gt_norm = normalize_translation(s.pose_gt.t, dataset_.stats);
      batch.push_back(std::move(item));
    }
    int skipped = 0;
    const LossBreakdown b =
        train_step(model_, batch, opt_, cfg_.lambda, &skipped);
    last_skipped_ += skipped;
    global_step_ += 1;
    if (cfg_.step_trace) {
      trace << global_step_ << "," << fmt(b.total) << "\n";
    }
    sum.rotation_geodesic += b.rotation_geodesic;
    sum.translation_l2 += b.translation_l2;
    sum.regularizer += b.regularizer;
    sum.log_tangent += b.log_tangent;
    sum.total += b.total;
    n_batches += 1;
  }
  const double inv = 1.0 / double(n_batches);
  last_train_loss_ = sum;
  last_train_loss_.rotation_geodesic *= inv;
  last_train_loss_.translation_l2 *= inv;
  last_train_loss_.regularizer *= inv;
  last_train_loss_.log_tangent *= inv;
  last_train_loss_.total *= inv;
  last_train_loss_.lambda = cfg_.lambda;
  return last_train_loss_.total;
}

LossBreakdown Trainer::epoch_validate() const {
  LossBreakdown sum;
  long long n = 0;
  for (const SyntheticSample& s : dataset_.val) {
    LossBreakdown b;
    try {
      b = model_.sample_loss_and_grads(
          s.image, s.pose_gt.r,
          normalize_translation(s.pose_gt.t, dataset_.stats), cfg_.lambda,
          nullptr);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DegenerateRotation) continue;
      throw;
    }
    sum.rotation_geodesic += b.rotation_geodesic;
    sum.translation_l2 += b.translation_l2;
    sum.regularizer += b.regularizer;
    sum.log_tangent += b.log_tangent;
    sum.total += b.total;
    n += 1;
  }
  require(n > 0, ErrorCode::DivergenceDetected,
          "validation: every sample was degenerate");
  const double inv = 1.0 / double(n);
  sum.rotation_geodesic *= inv;
  sum.translation_l2 *= inv;
  sum.regularizer *= inv;
  sum.log_tangent *= inv;
  sum.total *= inv;
  sum.lambda = cfg_.lambda;
  return sum;
}

double Trainer::run(long long stop_after_epoch) {
  const std::string log_path = cfg_.out_dir + "/train_log.csv";
  std::ofstream log(log_path, append_logs_ ? std::ios::app : std::ios::out);
  require(log.good(), ErrorCode::IoError, "cannot open " + log_path);
  if (!append_logs_) {
    log << kTrainLogHeader << "\n";
    if (cfg_.step_trace) {
      std::ofstream truncate(cfg_.out_dir + "/steps.csv");  // fresh run
    }
  }
  append_logs_ = true;  // a second run() call on this trainer continues

  long long until = cfg_.epochs;
  if (stop_after_epoch >= 0) until = std::min(until, stop_after_epoch);

  for (long long epoch = epoch_done_ + 1; epoch <= until; ++epoch) {
    epoch_train();
    const LossBreakdown val = epoch_validate();

    scheduler_.step(val.total, {&opt_.adam.lr, &opt_.lr_stiefel});

    epoch_done_ = epoch;
    if (val.total < best_val_) {
      best_val_ = val.total;
      save_state(best_checkpoint_path());
    }
    save_state(last_checkpoint_path());

    log << epoch << "," << fmt(last_train_loss_.total) << ","
        << fmt(last_train_loss_.rotation_geodesic) << ","
        << fmt(last_train_loss_.translation_l2) << ","
        << fmt(last_train_loss_.regularizer) << ","
        << fmt(last_train_loss_.log_tangent) << "," << fmt(val.total) << ","
        << fmt(val.rotation_geodesic) << "," << fmt(val.translation_l2) << ","
        << fmt(val.regularizer) << "," << fmt(val.log_tangent) << ","
        << fmt(opt_.adam.lr) << "," << fmt(opt_.lr_stiefel) << ","
        << last_skipped_ << "\n";
    log.flush();
  }
  return best_val_;
}

}  // namespace covpose
