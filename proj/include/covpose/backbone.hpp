#ifndef COVPOSE_BACKBONE_HPP
#define COVPOSE_BACKBONE_HPP

#include "covpose/common.hpp"
#include "covpose/spd_layers.hpp"

#include <vector>

namespace covpose {

/// Strided 2-D convolution with square kernel and zero padding. Weights are
/// stored as out_c x (in_c * k * k) so the forward pass is a GEMM against
/// an im2col patch matrix.
struct ConvLayer {
  int in_c = 0;
  int out_c = 0;
  int kernel = 3;
  int stride = 2;
  int pad = 1;
  Mat w;  // out_c x (in_c * kernel * kernel)
  Vec b;  // out_c

  void init(int in_channels, int out_channels, int kernel_size, double scale,
            Rng& rng);
  int out_size(int in_size) const {
    return (in_size + 2 * pad - kernel) / stride + 1;
  }
  Eigen::Index parameter_count() const { return w.size() + b.size(); }
};

struct ConvTrace {
  FeatureMap input;
  Mat patches;        // (in_c*k*k) x n_out
  FeatureMap output;  // post-activation
};

struct ConvGrads {
  Mat d_w;
  Vec d_b;
};

/// Forward pass with tanh activation; the trace carries what backward needs.
FeatureMap conv_forward(const ConvLayer& layer, const FeatureMap& in,
                        ConvTrace& trace);

/// Backward through activation and convolution; returns the input adjoint.
FeatureMap conv_backward(const ConvLayer& layer, const ConvTrace& trace,
                         const FeatureMap& d_out, ConvGrads& grads);

/// Fixed three-stage strided conv stack standing in for a large pretrained
/// backbone: input_size^2 grayscale in, C x (input_size/8)^2 features out.
struct ToyBackbone {
  std::vector<ConvLayer> layers;

  void init(int in_channels, const std::vector<int>& stage_channels,
            int kernel_size, double init_scale, Rng& rng);
  FeatureMap forward(const FeatureMap& image,
                     std::vector<ConvTrace>& traces) const;
  FeatureMap backward(const std::vector<ConvTrace>& traces,
                      const FeatureMap& d_out,
                      std::vector<ConvGrads>& grads) const;
  Eigen::Index parameter_count() const;
};

/// Two-layer perceptron with tanh hidden activation (the Euclidean
/// regression head of the MLP ablation).
struct Mlp {
  Mat w1;
  Vec b1;
  Mat w2;
  Vec b2;

  void init(int in_dim, int hidden, int out_dim, double scale, Rng& rng);
  Eigen::Index parameter_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size();
  }
};

struct MlpTrace {
  Vec input;
  Vec hidden;  // post-activation
};

struct MlpGrads {
  Mat d_w1;
  Vec d_b1;
  Mat d_w2;
  Vec d_b2;
};

Vec mlp_forward(const Mlp& mlp, const Vec& x, MlpTrace& trace);
Vec mlp_backward(const Mlp& mlp, const MlpTrace& trace, const Vec& d_out,
                 MlpGrads& grads);

}  // namespace covpose

#endif  // COVPOSE_BACKBONE_HPP
