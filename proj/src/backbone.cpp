#include "covpose/backbone.hpp"

#include <cmath>

namespace covpose {

namespace {

Mat im2col(const FeatureMap& in, int kernel, int stride, int pad, int out_h,
           int out_w) {
  const int n_out = out_h * out_w;
  Mat patches = Mat::Zero(in.channels * kernel * kernel, n_out);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      const int col = oy * out_w + ox;
      int row = 0;
      for (int c = 0; c < in.channels; ++c) {
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = oy * stride + ky - pad;
          for (int kx = 0; kx < kernel; ++kx, ++row) {
            const int ix = ox * stride + kx - pad;
            if (iy >= 0 && iy < in.height && ix >= 0 && ix < in.width) {
              patches(row, col) = in.x(c, iy * in.width + ix);
            }
          }
        }
      }
    }
  }
  return patches;
}

void col2im_accumulate(const Mat& d_patches, FeatureMap& d_in, int kernel,
                       int stride, int pad, int out_h, int out_w) {
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      const int col = oy * out_w + ox;
      int row = 0;
      for (int c = 0; c < d_in.channels; ++c) {
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = oy * stride + ky - pad;
          for (int kx = 0; kx < kernel; ++kx, ++row) {
            const int ix = ox * stride + kx - pad;
            if (iy >= 0 && iy < d_in.height && ix >= 0 && ix < d_in.width) {
              d_in.x(c, iy * d_in.width + ix) += d_patches(row, col);
            }
          }
        }
      }
    }
  }
}

}  // namespace

void ConvLayer::init(int in_channels, int out_channels, int kernel_size,
                     double scale, Rng& rng) {
  in_c = in_channels;
  out_c = out_channels;
  kernel = kernel_size;
  pad = kernel_size / 2;
  const int fan_in = in_c * kernel * kernel;
  const double std_dev = scale / std::sqrt(double(fan_in));
  w.resize(out_c, fan_in);
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      w(i, j) = std_dev * rng.gaussian();
    }
  }
  b = Vec::Zero(out_c);
}

FeatureMap conv_forward(const ConvLayer& layer, const FeatureMap& in,
                        ConvTrace& trace) {
  require(in.channels == layer.in_c, ErrorCode::InvalidInput,
          "conv_forward: channel mismatch");
  const int out_h = layer.out_size(in.height);
  const int out_w = layer.out_size(in.width);

  trace.input = in;
  trace.patches = im2col(in, layer.kernel, layer.stride, layer.pad, out_h,
                         out_w);

  FeatureMap out = FeatureMap::zeros(layer.out_c, out_h, out_w);
  out.x = layer.w * trace.patches;
  out.x.colwise() += layer.b;
  out.x = out.x.array().tanh();
  trace.output = out;
  return out;
}

FeatureMap conv_backward(const ConvLayer& layer, const ConvTrace& trace,
                         const FeatureMap& d_out, ConvGrads& grads) {
  // d(tanh)/dz = 1 - y^2 on the cached activation.
  const Mat d_z =
      d_out.x.array() * (1.0 - trace.output.x.array().square());

  grads.d_w = d_z * trace.patches.transpose();
  grads.d_b = d_z.rowwise().sum();

  const Mat d_patches = layer.w.transpose() * d_z;
  FeatureMap d_in = FeatureMap::zeros(trace.input.channels,
                                      trace.input.height, trace.input.width);
  col2im_accumulate(d_patches, d_in, layer.kernel, layer.stride, layer.pad,
                    trace.output.height, trace.output.width);
  return d_in;
}

void ToyBackbone::init(int in_channels, const std::vector<int>& stage_channels,
                       int kernel_size, double init_scale, Rng& rng) {
  layers.clear();
  int c = in_channels;
  for (int out_c : stage_channels) {
    ConvLayer layer;
    layer.init(c, out_c, kernel_size, init_scale, rng);
    layers.push_back(std::move(layer));
    c = out_c;
  }
}

FeatureMap ToyBackbone::forward(const FeatureMap& image,
                                std::vector<ConvTrace>& traces) const {
  traces.assign(layers.size(), ConvTrace{});
  FeatureMap f = image;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    f = conv_forward(layers[i], f, traces[i]);
  }
  return f;
}

FeatureMap ToyBackbone::backward(const std::vector<ConvTrace>& traces,
                                 const FeatureMap& d_out,
                                 std::vector<ConvGrads>& grads) const {
  grads.assign(layers.size(), ConvGrads{});
  FeatureMap d = d_out;
  for (std::size_t i = layers.size(); i-- > 0;) {
    d = conv_backward(layers[i], traces[i], d, grads[i]);
  }
  return d;
}

Eigen::Index ToyBackbone::parameter_count() const {
  Eigen::Index n = 0;
  for (const ConvLayer& layer : layers) n += layer.parameter_count();
  return n;
}

void Mlp::init(int in_dim, int hidden, int out_dim, double scale, Rng& rng) {
  const double s1 = scale / std::sqrt(double(in_dim));
  const double s2 = scale / std::sqrt(double(hidden));
  w1.resize(hidden, in_dim);
  for (Eigen::Index i = 0; i < w1.size(); ++i) {
    w1(i / in_dim, i % in_dim) = s1 * rng.gaussian();
  }
  b1 = Vec::Zero(hidden);
  w2.resize(out_dim, hidden);
  for (Eigen::Index i = 0; i < w2.size(); ++i) {
    w2(i / hidden, i % hidden) = s2 * rng.gaussian();
  }
  b2 = Vec::Zero(out_dim);
}

Vec mlp_forward(const Mlp& mlp, const Vec& x, MlpTrace& trace) {
  require(x.size() == mlp.w1.cols(), ErrorCode::InvalidInput,
          "mlp_forward: input size mismatch");
  trace.input = x;
  trace.hidden = ((mlp.w1 * x + mlp.b1).array().tanh()).matrix();
  return mlp.w2 * trace.hidden + mlp.b2;
}

Vec mlp_backward(const Mlp& mlp, const MlpTrace& trace, const Vec& d_out,
                 MlpGrads& grads) {
  grads.d_w2 = d_out * trace.hidden.transpose();
  grads.d_b2 = d_out;
  const Vec d_hidden_post = mlp.w2.transpose() * d_out;
  const Vec d_hidden =
      (d_hidden_post.array() * (1.0 - trace.hidden.array().square())).matrix();
  grads.d_w1 = d_hidden * trace.input.transpose();
  grads.d_b1 = d_hidden;
  return mlp.w1.transpose() * d_hidden;
}

}  // namespace covpose
