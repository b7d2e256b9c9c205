#ifndef COVPOSE_OPTIM_HPP
#define COVPOSE_OPTIM_HPP

#include "covpose/common.hpp"

#include <vector>

namespace covpose {

/// Tangent-space projection at W: G - W sym(W^T G).
Mat stiefel_project_gradient(const Mat& w, const Mat& g);

/// One projected-gradient step with QR retraction:
/// W+ = Q factor of qr(W - eta * project(W, G)). A zero step (eta == 0 or a
/// vanishing tangent gradient) returns W unchanged, bit for bit.
Mat stiefel_step(const Mat& w, const Mat& g, double eta);

/// Q factor of a seeded Gaussian matrix: a deterministic uniform-ish draw
/// with orthonormal columns.
Mat init_stiefel(int n, int m, std::uint64_t seed);

/// Bias-corrected Adam over a flat parameter vector.
struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long step = 0;
  Vec m;
  Vec v;

  void init(Eigen::Index size) {
    step = 0;
    m = Vec::Zero(size);
    v = Vec::Zero(size);
  }
};

void adam_step(AdamState& state, Vec& params, const Vec& grads);

/// Halves the learning rates once the validation loss has failed to improve
/// for more than `patience` consecutive epochs. Rates never increase.
struct PlateauScheduler {
  double factor = 0.5;
  int patience = 4;
  double min_delta = 0.0;
  double best = std::numeric_limits<double>::infinity();
  int epochs_since_improvement = 0;

  /// Returns true when the rates were reduced this epoch.
  bool step(double val_loss, std::vector<double*> lrs);
};

}  // namespace covpose

#endif  // COVPOSE_OPTIM_HPP
