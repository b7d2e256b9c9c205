#include "covpose/optim.hpp"

#include "covpose/linalg.hpp"

#include <cmath>

namespace covpose {

Mat stiefel_project_gradient(const Mat& w, const Mat& g) {
  require(w.rows() == g.rows() && w.cols() == g.cols(),
          ErrorCode::InvalidInput,
          "stiefel_project_gradient: shape mismatch");
  return g - w * sym(w.transpose() * g);
}

Mat stiefel_step(const Mat& w, const Mat& g, double eta) {
  const Mat g_tan = stiefel_project_gradient(w, g);
  if (eta == 0.0 || g_tan.isZero(0.0)) return w;
  return qr_reduced(w - eta * g_tan).q;
}

Mat init_stiefel(int n, int m, std::uint64_t seed) {
  require(n >= m && m >= 1, ErrorCode::InvalidInput,
          "init_stiefel needs n >= m >= 1");
  Rng rng(seed);
  Mat a(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      a(i, j) = rng.gaussian();
    }
  }
  return qr_reduced(a).q;
}

void adam_step(AdamState& state, Vec& params, const Vec& grads) {
  require(params.size() == grads.size(), ErrorCode::InvalidInput,
          "adam_step: parameter/gradient size mismatch");
  require(state.m.size() == params.size() && state.v.size() == params.size(),
          ErrorCode::InvalidInput, "adam_step: state not initialized");
  require(grads.allFinite(), ErrorCode::InvalidInput,
          "adam_step: non-finite gradient");

  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v +
            (1.0 - state.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, double(state.step));
  const Vec m_hat = state.m / c1;
  const Vec v_hat = state.v / c2;
  const Vec denom = v_hat.cwiseSqrt() + Vec::Constant(params.size(), state.eps);
  params -= state.lr * m_hat.cwiseQuotient(denom);
}

bool PlateauScheduler::step(double val_loss, std::vector<double*> lrs) {
  if (val_loss < best - min_delta) {
    best = val_loss;
    epochs_since_improvement = 0;
    return false;
  }
  epochs_since_improvement += 1;
  if (epochs_since_improvement > patience) {
    for (double* lr : lrs) *lr *= factor;
    epochs_since_improvement = 0;
    return true;
  }
  return false;
}

}  // namespace covpose
