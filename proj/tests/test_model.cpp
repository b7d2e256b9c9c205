#include "covpose/model.hpp"

#include "covpose/synthetic.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace covpose;
using namespace testsupport;

namespace {

Dataset tiny_dataset(int n_train = 16, std::uint64_t seed = 3) {
  DatasetConfig cfg;
  cfg.n_train = n_train;
  cfg.n_val = 4;
  cfg.n_test = 4;
  cfg.seed = seed;
  return generate_dataset(cfg);
}

PoseModel make_model(VariantId variant, std::uint64_t seed = 1) {
  ToyBackboneConfig bb;
  SpdHeadConfig head;
  if (variant == VariantId::ChannelCov) head.dims.front() = 32;
  if (variant == VariantId::EulerSPD3) head.dims.back() = 3;
  PoseModel model;
  model.init(bb, head, variant, seed);
  return model;
}

std::vector<TrainBatchSample> as_batch(const Dataset& ds, int count) {
  std::vector<TrainBatchSample> batch;
  for (int i = 0; i < count; ++i) {
    TrainBatchSample s;
    s.image = ds.train[i].image;
    s.r_gt = ds.train[i].pose_gt.r;
    s.t_gt_norm = normalize_translation(ds.train[i].pose_gt.t, ds.stats);
    batch.push_back(std::move(s));
  }
  return batch;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("spd_head_forward identity pass-through and closure") {
  PoseModel model = make_model(VariantId::Full6D);

  // Identity input: W^T I W = I at every layer and ReEig is a no-op.
  const Mat out = spd_head_forward(Mat::Identity(16, 16),
                                   model.bimap_weights(), 1e-4);
  CHECK((out - Mat::Identity(4, 4)).norm() < 1e-10);

  Rng rng(111);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat sigma0 = random_spd(16, rng, 1e-7, 2.0);
    SpdHeadTrace trace;
    model.spd_head_forward_traced(sigma0, trace);
    for (std::size_t l = 1; l < trace.sigma.size(); ++l) {
      CHECK(sym_eig(trace.sigma[l]).lambda.minCoeff() >= 1e-4 * (1.0 - 1e-6));
    }
  }
}

TEST_CASE("spd_head dimension chain is validated") {
  ToyBackboneConfig bb;
  SpdHeadConfig bad;
  bad.dims = {12, 8, 6, 4};  // does not match N = 16
  PoseModel model;
  CHECK_THROWS_AS(model.init(bb, bad, VariantId::Full6D, 1), Error);

  SpdHeadConfig nondesc;
  nondesc.dims = {16, 8, 12, 4};
  CHECK_THROWS_AS(model.init(bb, nondesc, VariantId::Full6D, 1), Error);
}

TEST_CASE("spd head gradient w.r.t. input matches finite differences") {
  PoseModel model = make_model(VariantId::Full6D);
  Rng rng(112);
  Mat sigma0 = random_spd(16, rng, 0.05, 2.0);

  auto loss = [&]() {
    return spd_head_forward(sym(sigma0), model.bimap_weights(), 1e-4).trace();
  };

  SpdHeadTrace trace;
  model.spd_head_forward_traced(sym(sigma0), trace);
  std::vector<Mat> d_w;
  for (const Mat& w : model.bimap_weights()) {
    d_w.push_back(Mat::Zero(w.rows(), w.cols()));
  }
  const Mat d_sigma0 =
      model.spd_head_backward(trace, Mat::Identity(4, 4), d_w);

  for (int i = 0; i < 16; i += 3) {
    for (int j = i; j < 16; j += 4) {
      const double fd = central_diff(loss, sigma0(i, j));
      CHECK(rel_err(d_sigma0(i, j), fd) < 1e-5);
    }
  }
}

TEST_CASE("forward satisfies the output contract") {
  const Dataset ds = tiny_dataset();
  for (VariantId variant :
       {VariantId::Full6D, VariantId::EulerSPD3, VariantId::MlpHead,
        VariantId::ChannelCov}) {
    PoseModel model = make_model(variant);
    const ForwardResult out = model.forward(ds.train[0].image);
    CHECK((out.r_hat.transpose() * out.r_hat - Mat3::Identity()).norm() < 1e-8);
    CHECK(out.r_hat.determinant() == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(out.t_hat_norm.allFinite());

    const ForwardResult again = model.forward(ds.train[0].image);
    CHECK(again.r_hat == out.r_hat);
    CHECK(again.t_hat_norm == out.t_hat_norm);
  }

  // the log-tangent variant stops at the SPD code
  PoseModel lt = make_model(VariantId::LogTangent);
  const ForwardResult out = lt.forward(ds.train[0].image);
  CHECK(out.spd_code.rows() == 4);
  CHECK(sym_eig(out.spd_code).lambda.minCoeff() > 0.0);
}

TEST_CASE("count_parameters matches hand-computed sizes") {
  PoseModel model = make_model(VariantId::Full6D);
  const ParameterCounts c = count_parameters(model);
  // conv: 8*9+8, 16*72+16, 32*144+32; stiefel: 16*12+12*8+8*6+6*4
  CHECK(c.euclidean == 80 + 1168 + 4640);
  CHECK(c.stiefel == 192 + 96 + 48 + 24);
  CHECK(c.total() == c.euclidean + c.stiefel);

  PoseModel mlp = make_model(VariantId::MlpHead);
  const ParameterCounts m = count_parameters(mlp);
  CHECK(m.euclidean == 5888 + (256 * 136 + 256 + 9 * 256 + 9));
  CHECK(m.stiefel == 0);

  // groups partition the total: flattening agrees with the counts
  CHECK(model.flatten_euclidean().size() == c.euclidean);
  Eigen::Index stiefel = 0;
  for (const Mat& w : model.bimap_weights()) stiefel += w.size();
  CHECK(stiefel == c.stiefel);
}

TEST_CASE("zero learning rates leave parameters bit-identical") {
  const Dataset ds = tiny_dataset();
  PoseModel model = make_model(VariantId::Full6D);
  const Vec before = model.flatten_euclidean();
  const std::vector<Mat> w_before = model.bimap_weights();

  OptimizerStates opt;
  opt.adam.lr = 0.0;
  opt.adam.init(model.euclidean_parameter_count());
  opt.lr_stiefel = 0.0;
  train_step(model, as_batch(ds, 4), opt, 1e-3);

  CHECK(model.flatten_euclidean() == before);
  for (std::size_t l = 0; l < w_before.size(); ++l) {
    CHECK(model.bimap_weights()[l] == w_before[l]);
  }
}

TEST_CASE("train_step decreases the loss on a fixed batch for most seeds") {
  const Dataset ds = tiny_dataset(8);
  int improved = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    PoseModel model = make_model(VariantId::Full6D, seed);
    OptimizerStates opt;
    opt.adam.lr = 1e-4;
    opt.adam.init(model.euclidean_parameter_count());
    opt.lr_stiefel = 1e-2;

    const std::vector<TrainBatchSample> batch = as_batch(ds, 8);
    double first = 0.0, last = 0.0;
    for (int step = 0; step < 50; ++step) {
      const LossBreakdown b = train_step(model, batch, opt, 1e-3);
      if (step == 0) first = b.total;
      last = b.total;
    }
    if (last < first) ++improved;
  }
  CHECK(improved >= 3);  // median over 5 seeds decreases
}

TEST_CASE("single-sample overfit sanity") {
  const Dataset ds = tiny_dataset(4);
  PoseModel model = make_model(VariantId::Full6D, 2);
  OptimizerStates opt;
  opt.adam.lr = 1e-3;  // overfit probe, not the training default
  opt.adam.init(model.euclidean_parameter_count());
  opt.lr_stiefel = 1e-2;

  const std::vector<TrainBatchSample> batch = as_batch(ds, 1);
  double loss = 1e9;
  int steps = 0;
  while (loss >= 1e-2 && steps < 2000) {
    loss = train_step(model, batch, opt, 1e-3).total;
    ++steps;
  }
  CHECK(loss < 1e-2);
}

TEST_CASE("fixed seed gives a bitwise-identical loss trajectory") {
  const Dataset ds = tiny_dataset(8);
  auto run = [&]() {
    PoseModel model = make_model(VariantId::Full6D, 7);
    OptimizerStates opt;
    opt.adam.lr = 1e-4;
    opt.adam.init(model.euclidean_parameter_count());
    opt.lr_stiefel = 1e-2;
    std::vector<double> losses;
    const std::vector<TrainBatchSample> batch = as_batch(ds, 8);
    for (int step = 0; step < 100; ++step) {
      losses.push_back(train_step(model, batch, opt, 1e-3).total);
    }
    return losses;
  };
  const std::vector<double> a = run();
  const std::vector<double> b = run();
  CHECK(a == b);
}

TEST_CASE("variant code-path counters") {
  const Dataset ds = tiny_dataset(8);
  OptimizerStates opt;

  SUBCASE("mlp head never touches the SPD stack") {
    PoseModel model = make_model(VariantId::MlpHead);
    opt.adam.init(model.euclidean_parameter_count());
    model.reset_counters();
    train_step(model, as_batch(ds, 4), opt, 1e-3);
    CHECK(model.counters().bimap == 0);
    CHECK(model.counters().reeig == 0);
    CHECK(model.counters().cholesky_decode == 0);
    CHECK(model.counters().mlp > 0);
    CHECK(model.counters().cov_pool > 0);
  }

  SUBCASE("log tangent training never decodes") {
    PoseModel model = make_model(VariantId::LogTangent);
    opt.adam.init(model.euclidean_parameter_count());
    model.reset_counters();
    train_step(model, as_batch(ds, 4), opt, 1e-3);
    CHECK(model.counters().cholesky_decode == 0);
    CHECK(model.counters().bimap > 0);
    CHECK(model.counters().reeig > 0);
  }

  SUBCASE("full pipeline exercises pooling, head, and decode") {
    PoseModel model = make_model(VariantId::Full6D);
    opt.adam.init(model.euclidean_parameter_count());
    model.reset_counters();
    train_step(model, as_batch(ds, 4), opt, 1e-3);
    CHECK(model.counters().cov_pool > 0);
    CHECK(model.counters().bimap > 0);
    CHECK(model.counters().reeig > 0);
    CHECK(model.counters().cholesky_decode > 0);
    CHECK(model.counters().mlp == 0);
  }

  SUBCASE("channel covariance pools channels") {
    PoseModel model = make_model(VariantId::ChannelCov);
    opt.adam.init(model.euclidean_parameter_count());
    model.reset_counters();
    train_step(model, as_batch(ds, 4), opt, 1e-3);
    CHECK(model.counters().channel_cov_pool > 0);
    CHECK(model.counters().cov_pool == 0);
  }
}

TEST_CASE("end-to-end gradients match finite differences") {
  const Dataset ds = tiny_dataset(4);
  const Mat image = ds.train[0].image;
  const Mat3 r_gt = ds.train[0].pose_gt.r;
  const Vec3 t_gt = normalize_translation(ds.train[0].pose_gt.t, ds.stats);

  for (VariantId variant : {VariantId::Full6D, VariantId::MlpHead}) {
    CAPTURE(variant_name(variant));
    PoseModel model = make_model(variant, 5);
    ModelGrads grads = model.zero_grads();
    model.sample_loss_and_grads(image, r_gt, t_gt, 1e-3, &grads);
    const Vec flat_grads = model.flatten_euclidean_grads(grads);

    Vec flat = model.flatten_euclidean();
    auto loss = [&]() {
      PoseModel probe = model;
      probe.unflatten_euclidean(flat);
      return probe.sample_loss_and_grads(image, r_gt, t_gt, 1e-3, nullptr)
          .total;
    };
    Rng rng(113);
    for (int k = 0; k < 8; ++k) {
      const auto idx = Eigen::Index(rng.bounded(std::uint64_t(flat.size())));
      const double fd = central_diff(loss, flat(idx));
      CHECK(rel_err(flat_grads(idx), fd) < 1e-4);
    }

    if (variant == VariantId::Full6D) {
      // Euclidean gradient of a BiMap weight entry, pre-projection
      auto wloss = [&]() {
        PoseModel probe = model;
        probe.bimap_weights() = model.bimap_weights();
        return probe.sample_loss_and_grads(image, r_gt, t_gt, 1e-3, nullptr)
            .total;
      };
      for (int k = 0; k < 4; ++k) {
        const std::size_t layer = k % model.bimap_weights().size();
        Mat& w = model.bimap_weights()[layer];
        const auto idx = Eigen::Index(rng.bounded(std::uint64_t(w.size())));
        const double fd = central_diff(wloss, w.data()[idx]);
        CHECK(rel_err(grads.bimap[layer].data()[idx], fd) < 1e-4);
      }
    }
  }
}

TEST_CASE("train_step detects divergence") {
  const Dataset ds = tiny_dataset(4);
  PoseModel model = make_model(VariantId::Full6D);
  OptimizerStates opt;
  opt.adam.init(model.euclidean_parameter_count());

  std::vector<TrainBatchSample> batch = as_batch(ds, 1);
  batch[0].t_gt_norm = Vec3(std::nan(""), 0.0, 0.0);
  CHECK_THROWS_AS((void)train_step(model, batch, opt, 1e-3), Error);
}

}  // TEST_SUITE
