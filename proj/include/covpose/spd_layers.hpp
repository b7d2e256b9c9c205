#ifndef COVPOSE_SPD_LAYERS_HPP
#define COVPOSE_SPD_LAYERS_HPP

#include "covpose/common.hpp"
#include "covpose/linalg.hpp"

namespace covpose {

/// Activation stack of C channels over an H x W grid. Stored flattened:
/// row i of x is the i-th channel scanned row-major over the grid.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  Mat x;  // channels x (height*width)

  int spatial_size() const { return height * width; }

  static FeatureMap zeros(int c, int h, int w) {
    FeatureMap f;
    f.channels = c;
    f.height = h;
    f.width = w;
    f.x = Mat::Zero(c, h * w);
    return f;
  }
};

/// Spatial covariance of the flattened channels: an N x N PSD matrix
/// (N = H*W) with channels acting as samples. Rank is at most C-1; the
/// first ReEig in the head is what lifts it onto the SPD manifold.
Mat cov_pool(const FeatureMap& f);

/// Gradient of cov_pool with respect to the feature map. d_sigma is
/// symmetrized before use.
Mat cov_pool_backward(const FeatureMap& f, const Mat& d_sigma);

/// Congruence reduction Y = W^T X W with a column-orthonormal W (n x m).
Mat bimap_forward(const Mat& x, const Mat& w);

struct BimapGrads {
  Mat d_x;
  Mat d_w;
};

/// Euclidean gradients of the congruence map; the Riemannian projection of
/// d_w onto the Stiefel tangent space happens in the optimizer.
BimapGrads bimap_backward(const Mat& x, const Mat& w, const Mat& d_y);

/// Eigenvalue rectification: clamps the spectrum from below at eps.
Mat reeig_forward(const Mat& x, double eps);

/// Gradient of reeig_forward; clamped eigenvalues pass no eigenvalue
/// adjoint (max-pooling style sub-gradient at the kink).
Mat reeig_backward(const Mat& x, double eps, const Mat& d_y);

/// Matrix logarithm of an SPD matrix via its eigendecomposition.
Mat log_eig(const Mat& x);

/// Gradient of log_eig with respect to its SPD input.
Mat log_eig_backward(const Mat& x, const Mat& d_y);

/// || log(A) - log(B) ||_F, the Log-Euclidean distance between SPD matrices.
double log_euclidean_distance(const Mat& a, const Mat& b);

/// Channel covariance (C x C) with the per-channel spatial mean removed;
/// spatial locations act as samples.
Mat channel_cov_pool(const FeatureMap& f);

Mat channel_cov_pool_backward(const FeatureMap& f, const Mat& d_sigma);

}  // namespace covpose

#endif  // COVPOSE_SPD_LAYERS_HPP
