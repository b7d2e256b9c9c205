#include "covpose/backbone.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace covpose;
using namespace testsupport;

namespace {

FeatureMap random_input(int c, int h, int w, Rng& rng) {
  FeatureMap f = FeatureMap::zeros(c, h, w);
  f.x = random_gaussian(c, h * w, rng);
  return f;
}

}  // namespace

TEST_SUITE("backbone") {

TEST_CASE("conv output geometry") {
  Rng rng(101);
  ConvLayer layer;
  layer.init(1, 4, 3, 1.0, rng);
  CHECK(layer.out_size(32) == 16);
  CHECK(layer.out_size(16) == 8);
  CHECK(layer.out_size(8) == 4);

  ConvTrace trace;
  const FeatureMap out = conv_forward(layer, random_input(1, 8, 8, rng), trace);
  CHECK(out.channels == 4);
  CHECK(out.height == 4);
  CHECK(out.width == 4);
  for (Eigen::Index i = 0; i < out.x.size(); ++i) {
    CHECK(std::abs(out.x(i)) <= 1.0);  // tanh range
  }
}

TEST_CASE("conv gradients match finite differences") {
  Rng rng(102);
  ConvLayer layer;
  layer.init(2, 3, 3, 1.0, rng);
  FeatureMap in = random_input(2, 6, 6, rng);
  const Mat weights = random_gaussian(3, 9, rng);  // loss weights on output

  auto loss = [&]() {
    ConvTrace t;
    const FeatureMap out = conv_forward(layer, in, t);
    return (weights.array() * out.x.array()).sum();
  };

  ConvTrace trace;
  const FeatureMap out = conv_forward(layer, in, trace);
  FeatureMap d_out = FeatureMap::zeros(out.channels, out.height, out.width);
  d_out.x = weights;
  ConvGrads grads;
  const FeatureMap d_in = conv_backward(layer, trace, d_out, grads);

  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 6; ++j) {
      const double fd = central_diff(loss, layer.w(i, j * 2));
      CHECK(rel_err(grads.d_w(i, j * 2), fd) < 1e-6);
    }
  }
  for (int i = 0; i < 3; ++i) {
    const double fd = central_diff(loss, layer.b(i));
    CHECK(rel_err(grads.d_b(i), fd) < 1e-6);
  }
  for (int c = 0; c < 2; ++c) {
    for (int j = 0; j < 36; j += 5) {
      const double fd = central_diff(loss, in.x(c, j));
      CHECK(rel_err(d_in.x(c, j), fd) < 1e-6);
    }
  }
}

TEST_CASE("backbone stacks to the expected output shape") {
  Rng rng(103);
  ToyBackbone bb;
  bb.init(1, {8, 16, 32}, 3, 2.0, rng);
  CHECK(bb.parameter_count() == 80 + 1168 + 4640);

  std::vector<ConvTrace> traces;
  const FeatureMap out = bb.forward(random_input(1, 32, 32, rng), traces);
  CHECK(out.channels == 32);
  CHECK(out.height == 4);
  CHECK(out.width == 4);
  CHECK(traces.size() == 3);
}

TEST_CASE("mlp gradients match finite differences") {
  Rng rng(104);
  Mlp mlp;
  mlp.init(10, 7, 4, 1.0, rng);
  Vec x = random_gaussian(10, 1, rng);
  Vec w = random_gaussian(4, 1, rng);

  auto loss = [&]() {
    MlpTrace t;
    return w.dot(mlp_forward(mlp, x, t));
  };

  MlpTrace trace;
  mlp_forward(mlp, x, trace);
  MlpGrads grads;
  const Vec d_in = mlp_backward(mlp, trace, w, grads);

  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 10; j += 3) {
      CHECK(rel_err(grads.d_w1(i, j), central_diff(loss, mlp.w1(i, j))) < 1e-6);
    }
    CHECK(rel_err(grads.d_b1(i), central_diff(loss, mlp.b1(i))) < 1e-6);
  }
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 7; ++j) {
      CHECK(rel_err(grads.d_w2(i, j), central_diff(loss, mlp.w2(i, j))) < 1e-6);
    }
  }
  for (int i = 0; i < 10; ++i) {
    CHECK(rel_err(d_in(i), central_diff(loss, x(i))) < 1e-6);
  }
}

}  // TEST_SUITE
