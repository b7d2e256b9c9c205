#ifndef COVPOSE_TRAINER_HPP
#define COVPOSE_TRAINER_HPP

#include "covpose/checkpoint.hpp"
#include "covpose/config.hpp"
#include "covpose/metrics.hpp"
#include "covpose/model.hpp"
#include "covpose/synthetic.hpp"

#include <string>
#include <vector>

namespace covpose {

/// Pose readout for evaluation. The log-tangent variant decodes its SPD code
/// here (its training path never does).
PoseSE3 predict_pose(const PoseModel& model, const Mat& image,
                     const TranslationStats& stats);

MetricReport evaluate_model(const PoseModel& model,
                            const std::vector<SyntheticSample>& split,
                            const TranslationStats& stats,
                            const ToyObject& object);

/// Epoch-driven training loop with plateau scheduling, CSV logging, and
/// last/best checkpointing. Deterministic: identical config + seed gives an
/// identical trajectory, and resuming from last.ckpt continues it bit for
/// bit.
class Trainer {
 public:
  Trainer(const RunConfig& cfg, const Dataset& dataset);

  /// Replaces the freshly initialized state with a checkpoint's.
  void resume_from(const std::string& checkpoint_path);

  /// Trains until cfg.epochs (or until `stop_after_epoch` when that comes
  /// first, simulating an interrupted run); returns the best validation loss.
  double run(long long stop_after_epoch = -1);

  const PoseModel& model() const { return model_; }
  PoseModel& mutable_model() { return model_; }
  const Dataset& dataset() const { return dataset_; }
  long long global_step() const { return global_step_; }
  std::string best_checkpoint_path() const;
  std::string last_checkpoint_path() const;

  /// Restores model parameters from a checkpoint (for evaluation).
  void load_weights(const Checkpoint& ckpt);

 private:
  double epoch_train();
  LossBreakdown epoch_validate() const;
  void save_state(const std::string& path) const;
  Checkpoint make_checkpoint() const;

  RunConfig cfg_;
  Dataset dataset_;
  PoseModel model_;
  OptimizerStates opt_;
  PlateauScheduler scheduler_;
  Rng shuffle_rng_;
  long long epoch_done_ = 0;
  long long global_step_ = 0;
  double best_val_ = std::numeric_limits<double>::infinity();
  bool append_logs_ = false;
  LossBreakdown last_train_loss_;
  int last_skipped_ = 0;
};

/// Column layout of the per-epoch training log.
extern const char* kTrainLogHeader;

}  // namespace covpose

#endif  // COVPOSE_TRAINER_HPP
