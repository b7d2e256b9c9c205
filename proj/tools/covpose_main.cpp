// Command-line harness: dataset generation, training, evaluation, the
// covariance/pose correlation analysis, and the ablation sweep.

#include "covpose/config.hpp"
#include "covpose/metrics.hpp"
#include "covpose/model.hpp"
#include "covpose/synthetic.hpp"
#include "covpose/trainer.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace covpose;

struct CliOverrides {
  std::string config_path;
  std::string variant;
  std::string out_dir;
  std::string dataset_dir;
  std::int64_t seed = -1;
  int epochs = -1;
  int n_train = -1, n_val = -1, n_test = -1;
  bool step_trace = false;
};

void add_common_options(CLI::App* cmd, CliOverrides& ov) {
  cmd->add_option("--config", ov.config_path, "Config file (key = value)");
  cmd->add_option("--variant", ov.variant,
                  "full6d | euler_spd3 | mlp_head | channel_cov | log_tangent");
  cmd->add_option("--out-dir", ov.out_dir, "Output directory");
  cmd->add_option("--dataset-dir", ov.dataset_dir, "Dataset directory");
  cmd->add_option("--seed", ov.seed, "Run seed");
  cmd->add_option("--epochs", ov.epochs, "Training epochs");
  cmd->add_option("--n-train", ov.n_train, "Training split size");
  cmd->add_option("--n-val", ov.n_val, "Validation split size");
  cmd->add_option("--n-test", ov.n_test, "Test split size");
  cmd->add_flag("--step-trace", ov.step_trace, "Write per-step loss trace");
}

RunConfig resolve_config(const CliOverrides& ov) {
  RunConfig cfg;
  if (const char* env = std::getenv("COVPOSE_OUT_DIR")) {
    cfg.out_dir = env;
    cfg.dataset_dir = std::string(env) + "/dataset";
  }
  if (!ov.config_path.empty()) {
    std::ifstream in(ov.config_path);
    require(in.good(), ErrorCode::IoError,
            "cannot open config file " + ov.config_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    cfg = parse_config(buf.str(), cfg);
  }
  if (!ov.variant.empty()) cfg.variant = ov.variant;
  if (!ov.out_dir.empty()) cfg.out_dir = ov.out_dir;
  if (!ov.dataset_dir.empty()) cfg.dataset_dir = ov.dataset_dir;
  if (ov.seed >= 0) cfg.seed = std::uint64_t(ov.seed);
  if (ov.epochs >= 0) cfg.epochs = ov.epochs;
  if (ov.n_train >= 0) cfg.n_train = ov.n_train;
  if (ov.n_val >= 0) cfg.n_val = ov.n_val;
  if (ov.n_test >= 0) cfg.n_test = ov.n_test;
  if (ov.step_trace) cfg.step_trace = true;
  cfg.validate();
  return cfg;
}

int cmd_generate(const RunConfig& cfg) {
  const Dataset ds = generate_dataset(dataset_config_from(cfg));
  save_dataset(ds, cfg.dataset_dir);
  std::cout << "dataset written to " << cfg.dataset_dir << "\n"
            << "train=" << ds.train.size() << " val=" << ds.val.size()
            << " test=" << ds.test.size() << "\n"
            << "hash=" << dataset_hash(ds) << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, bool resume) {
  const Dataset ds = load_dataset(cfg.dataset_dir);
  Trainer trainer(cfg, ds);
  if (resume) trainer.resume_from(trainer.last_checkpoint_path());
  const double best = trainer.run();
  std::cout << "training done; best validation loss " << best << "\n"
            << "best checkpoint: " << trainer.best_checkpoint_path() << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint_arg,
             const std::string& split_name) {
  const Dataset ds = load_dataset(cfg.dataset_dir);
  const std::string ckpt_path =
      checkpoint_arg.empty() ? cfg.out_dir + "/best.ckpt" : checkpoint_arg;
  require(std::filesystem::exists(ckpt_path), ErrorCode::IoError,
          "checkpoint not found: " + ckpt_path);

  Trainer trainer(cfg, ds);
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  trainer.load_weights(ckpt);

  const std::vector<SyntheticSample>* split = &ds.test;
  if (split_name == "train") split = &ds.train;
  else if (split_name == "val") split = &ds.val;
  else require(split_name == "test", ErrorCode::InvalidInput,
               "unknown split: " + split_name);

  const MetricReport report =
      evaluate_model(trainer.model(), *split, ckpt.stats, ds.object);
  const std::string out = cfg.out_dir + "/metrics_" + split_name + ".csv";
  write_metric_report_csv(report, out);
  std::cout << "split=" << split_name << " add_mean=" << report.add_mean
            << " adds_mean=" << report.adds_mean
            << " add_accuracy=" << report.add_accuracy
            << " auc_add=" << report.auc_add
            << " median_rot_deg=" << report.median_rotation_error_deg
            << " median_trans_m=" << report.median_translation_error_m << "\n"
            << "report: " << out << "\n";
  return 0;
}

int cmd_analyze(const RunConfig& cfg) {
  const Dataset ds = load_dataset(cfg.dataset_dir);

  // Untrained backbone: fresh seeded init, no training, mirroring the
  // no-task-leakage protocol of the correlation experiment.
  PoseModel model;
  model.init(backbone_config_from(cfg),
             head_config_for_variant(cfg, VariantId::Full6D), VariantId::Full6D,
             cfg.seed);
  const auto feature_fn = [&model](const Mat& image) {
    std::vector<ConvTrace> traces;
    FeatureMap f;
    f.channels = 1;
    f.height = int(image.rows());
    f.width = int(image.cols());
    f.x = image.reshaped<Eigen::RowMajor>(1, image.size());
    return model.backbone().forward(f, traces);
  };

  CorrelationConfig ccfg;
  ccfg.n_pairs = cfg.n_pairs;
  ccfg.n_bins = cfg.bins;
  ccfg.seed = cfg.analysis_seed;
  ccfg.eps_reeig = cfg.eps_reeig;
  ccfg.pose_distance_scale = ds.object.diameter;

  const CorrelationCurve curve =
      covariance_pose_correlation(ds.test, feature_fn, ccfg);
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  const std::string out = cfg.out_dir + "/correlation.csv";
  write_correlation_csv(curve, out);
  std::cout << "spearman_cov=" << curve.spearman_cov
            << " spearman_cosine=" << curve.spearman_cosine
            << " spearman_euclid=" << curve.spearman_euclid << "\n"
            << "curve: " << out << "\n";
  return 0;
}

int cmd_ablate(const RunConfig& cfg) {
  const Dataset ds = load_dataset(cfg.dataset_dir);
  const std::uint64_t hash = dataset_hash(ds);

  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  const std::string out_path = cfg.out_dir + "/ablation.csv";
  std::ofstream out(out_path);
  require(out.good(), ErrorCode::IoError, "cannot open " + out_path);
  out << "variant,reference,seed,dataset_hash,median_rot_deg,median_trans_m,"
         "add_mean,adds_mean,add_accuracy,auc_add\n";
  out.precision(17);

  const char* variants[] = {"full6d", "euler_spd3", "mlp_head", "channel_cov",
                            "log_tangent"};
  for (const char* name : variants) {
    RunConfig vcfg = cfg;
    vcfg.variant = name;
    vcfg.out_dir = cfg.out_dir + "/" + name;
    Trainer trainer(vcfg, ds);
    trainer.run();
    const Checkpoint best = load_checkpoint(trainer.best_checkpoint_path());
    trainer.load_weights(best);
    const MetricReport report =
        evaluate_model(trainer.model(), ds.test, best.stats, ds.object);
    out << name << "," << (std::string(name) == "full6d" ? 1 : 0) << ","
        << vcfg.seed << "," << hash << ","
        << report.median_rotation_error_deg << ","
        << report.median_translation_error_m << "," << report.add_mean << ","
        << report.adds_mean << "," << report.add_accuracy << ","
        << report.auc_add << "\n";
    out.flush();
    std::cout << "variant " << name << " done: median_rot_deg="
              << report.median_rotation_error_deg << "\n";
  }
  std::cout << "ablation table: " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"covariance-pooled SPD pose regression harness"};
  app.require_subcommand(1);

  CliOverrides ov;
  std::string checkpoint;
  std::string split = "test";
  bool resume = false;

  CLI::App* generate = app.add_subcommand("generate", "Generate the synthetic dataset");
  add_common_options(generate, ov);

  CLI::App* train = app.add_subcommand("train", "Train a variant");
  add_common_options(train, ov);
  train->add_flag("--resume", resume, "Resume from last.ckpt");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common_options(eval, ov);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint path (default best.ckpt)");
  eval->add_option("--split", split, "train | val | test");

  CLI::App* analyze = app.add_subcommand(
      "analyze", "Covariance/pose correlation with an untrained backbone");
  add_common_options(analyze, ov);

  CLI::App* ablate = app.add_subcommand("ablate", "Train and evaluate all variants");
  add_common_options(ablate, ov);

  try {
    app.parse(argc, argv);
    const covpose::RunConfig cfg = resolve_config(ov);
    if (generate->parsed()) return cmd_generate(cfg);
    if (train->parsed()) return cmd_train(cfg, resume);
    if (eval->parsed()) return cmd_eval(cfg, checkpoint, split);
    if (analyze->parsed()) return cmd_analyze(cfg);
    if (ablate->parsed()) return cmd_ablate(cfg);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const covpose::Error& e) {
    std::cerr << "ERROR " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "ERROR Internal: " << e.what() << "\n";
    return 1;
  }
}
