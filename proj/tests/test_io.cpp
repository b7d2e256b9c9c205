#include "covpose/checkpoint.hpp"
#include "covpose/config.hpp"
#include "covpose/trainer.hpp"

#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace covpose;
using namespace testsupport;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

RunConfig small_run_config(const std::string& out_dir) {
  RunConfig cfg;
  cfg.n_train = 48;
  cfg.n_val = 8;
  cfg.n_test = 8;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.seed = 11;
  cfg.out_dir = out_dir;
  cfg.dataset_dir = out_dir + "/dataset";
  cfg.step_trace = true;
  return cfg;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("config serializes and parses back to itself") {
  RunConfig cfg;
  cfg.variant = "channel_cov";
  cfg.seed = 42;
  cfg.dims = {16, 10, 7, 5, 4};
  cfg.lr_adam = 3.25e-4;
  cfg.lambda = 2e-3;
  cfg.factor = 0.25;
  cfg.step_trace = true;
  cfg.out_dir = "/tmp/x";
  const RunConfig back = parse_config(serialize_config(cfg));
  CHECK(back == cfg);
}

TEST_CASE("config parser flags unknown keys and bad values") {
  CHECK_THROWS_AS((void)parse_config("bogus_key = 3\n"), Error);
  CHECK_THROWS_AS((void)parse_config("epochs = banana\n"), Error);
  RunConfig bad;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = RunConfig{};
  bad.variant = "nope";
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("checkpoint save/load is bit-exact") {
  Rng rng(121);
  Checkpoint ckpt;
  ckpt.config_text = serialize_config(RunConfig{});
  ckpt.epoch = 3;
  ckpt.global_step = 1234;
  ckpt.best_val = 0.125;
  ckpt.euclidean_params = random_gaussian(64, 1, rng);
  ckpt.bimap_weights.push_back(random_gaussian(6, 3, rng));
  ckpt.bimap_weights.push_back(random_gaussian(3, 2, rng));
  ckpt.adam.lr = 1e-4;
  ckpt.adam.step = 99;
  ckpt.adam.m = random_gaussian(64, 1, rng);
  ckpt.adam.v = random_gaussian(64, 1, rng).cwiseAbs();
  ckpt.lr_stiefel = 5e-3;
  ckpt.scheduler.best = 0.25;
  ckpt.scheduler.epochs_since_improvement = 2;
  ckpt.stats.t_min = Vec3(0.123456789012345, -2.5, 3.25);
  ckpt.stats.t_range = Vec3(0.5, 0.25, 1e-6);
  ckpt.rng_state = "12345 6789";

  const std::string path = "/tmp/covpose_test.ckpt";
  save_checkpoint(ckpt, path);
  const Checkpoint back = load_checkpoint(path);

  CHECK(back.config_text == ckpt.config_text);
  CHECK(back.epoch == ckpt.epoch);
  CHECK(back.global_step == ckpt.global_step);
  CHECK(back.best_val == ckpt.best_val);
  CHECK(back.euclidean_params == ckpt.euclidean_params);
  CHECK(back.bimap_weights[0] == ckpt.bimap_weights[0]);
  CHECK(back.bimap_weights[1] == ckpt.bimap_weights[1]);
  CHECK(back.adam.step == ckpt.adam.step);
  CHECK(back.adam.m == ckpt.adam.m);
  CHECK(back.adam.v == ckpt.adam.v);
  CHECK(back.lr_stiefel == ckpt.lr_stiefel);
  CHECK(back.scheduler.best == ckpt.scheduler.best);
  CHECK(back.scheduler.epochs_since_improvement ==
        ckpt.scheduler.epochs_since_improvement);
  CHECK(back.stats.t_min == ckpt.stats.t_min);
  CHECK(back.stats.t_range == ckpt.stats.t_range);
  CHECK(back.rng_state == ckpt.rng_state);
  std::filesystem::remove(path);

  CHECK_THROWS_AS((void)load_checkpoint("/tmp/covpose_missing.ckpt"), Error);
}

TEST_CASE("training logs are byte-identical across reruns") {
  const std::string dir = "/tmp/covpose_rerun";
  std::filesystem::remove_all(dir);

  const RunConfig cfg = small_run_config(dir);
  const Dataset ds = generate_dataset(dataset_config_from(cfg));

  Trainer first(cfg, ds);
  first.run();
  const std::string log1 = slurp(dir + "/train_log.csv");
  const std::string steps1 = slurp(dir + "/steps.csv");
  const std::string ckpt1 = slurp(dir + "/last.ckpt");

  std::filesystem::remove_all(dir);
  Trainer second(cfg, ds);
  second.run();
  CHECK(slurp(dir + "/train_log.csv") == log1);
  CHECK(slurp(dir + "/steps.csv") == steps1);
  CHECK(slurp(dir + "/last.ckpt") == ckpt1);

  // schema stability
  std::istringstream log(log1);
  std::string header;
  std::getline(log, header);
  CHECK(header == kTrainLogHeader);

  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint resume reproduces the uninterrupted trajectory") {
  const std::string dir_full = "/tmp/covpose_resume_full";
  const std::string dir_split = "/tmp/covpose_resume_split";
  std::filesystem::remove_all(dir_full);
  std::filesystem::remove_all(dir_split);

  RunConfig cfg = small_run_config(dir_full);
  cfg.epochs = 2;  // 6 steps per epoch at 48/8
  const Dataset ds = generate_dataset(dataset_config_from(cfg));

  {
    Trainer uninterrupted(cfg, ds);
    uninterrupted.run();
  }
  const std::string ckpt_ref = slurp(dir_full + "/last.ckpt");
  const std::string steps_ref = slurp(dir_full + "/steps.csv");
  const std::string log_ref = slurp(dir_full + "/train_log.csv");

  // same config and directory, interrupted after epoch 1, then resumed
  std::filesystem::remove_all(dir_full);
  {
    Trainer trainer(cfg, ds);
    trainer.run(/*stop_after_epoch=*/1);
  }
  {
    Trainer resumed(cfg, ds);
    resumed.resume_from(dir_full + "/last.ckpt");
    resumed.run();
  }

  CHECK(slurp(dir_full + "/last.ckpt") == ckpt_ref);
  CHECK(slurp(dir_full + "/steps.csv") == steps_ref);
  CHECK(slurp(dir_full + "/train_log.csv") == log_ref);

  // resuming against a different config is rejected
  {
    RunConfig other = cfg;
    other.out_dir = dir_split;
    other.dataset_dir = dir_split + "/dataset";
    Trainer trainer(other, ds);
    CHECK_THROWS_AS(trainer.resume_from(dir_full + "/last.ckpt"), Error);
  }

  std::filesystem::remove_all(dir_full);
  std::filesystem::remove_all(dir_split);
}

}  // TEST_SUITE
