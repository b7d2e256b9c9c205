#ifndef COVPOSE_CHECKPOINT_HPP
#define COVPOSE_CHECKPOINT_HPP

#include "covpose/config.hpp"
#include "covpose/model.hpp"
#include "covpose/optim.hpp"
#include "covpose/pose_codec.hpp"

#include <string>

namespace covpose {

/// Full training state. load(save(x)) reproduces the trajectory bit-exactly:
/// parameters and optimizer moments are stored as raw doubles, the RNG as
/// its serialized engine state, and the translation statistics as labeled
/// decimals.
struct Checkpoint {
  std::uint32_t version = 1;
  std::string config_text;
  long long epoch = 0;
  long long global_step = 0;
  double best_val = std::numeric_limits<double>::infinity();

  Vec euclidean_params;
  std::vector<Mat> bimap_weights;

  AdamState adam;
  double lr_stiefel = 1e-2;
  PlateauScheduler scheduler;
  TranslationStats stats;
  std::string rng_state;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace covpose

#endif  // COVPOSE_CHECKPOINT_HPP
