#ifndef COVPOSE_CONFIG_HPP
#define COVPOSE_CONFIG_HPP

#include "covpose/model.hpp"
#include "covpose/synthetic.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace covpose {

/// One experiment run, fully determined by this structure plus its seed.
/// The key names in the serialized form are a compatibility contract.
struct RunConfig {
  // [run]
  std::string variant = "full6d";
  std::uint64_t seed = 1;
  std::string out_dir = "runs/default";
  std::string dataset_dir = "runs/default/dataset";

  // [dataset]
  int n_train = 2000;
  int n_val = 200;
  int n_test = 500;
  std::uint64_t data_seed = 7;

  // [model]
  std::vector<int> dims = {16, 12, 8, 6, 4};
  double eps_reeig = 1e-4;
  int input_size = 32;
  std::vector<int> channels = {8, 16, 32};
  int kernel = 3;
  double init_scale = 2.0;
  int mlp_hidden = 256;

  // [optim]
  double lr_stiefel = 1e-2;
  double lr_adam = 1e-4;
  double lambda = 1e-3;
  int batch_size = 8;
  int epochs = 30;
  int patience = 4;
  double factor = 0.5;
  bool step_trace = false;

  // [analysis]
  int n_pairs = 20000;
  int bins = 10;
  std::uint64_t analysis_seed = 99;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

std::string serialize_config(const RunConfig& cfg);
RunConfig parse_config(const std::string& text);
RunConfig parse_config(const std::string& text, RunConfig base);
RunConfig load_config_file(const std::string& path);
void save_config_file(const RunConfig& cfg, const std::string& path);

ToyBackboneConfig backbone_config_from(const RunConfig& cfg);
DatasetConfig dataset_config_from(const RunConfig& cfg);

/// Head dimension chain adjusted per variant: the channel-covariance
/// variant starts from C instead of N, the Euler variant ends at 3.
SpdHeadConfig head_config_for_variant(const RunConfig& cfg, VariantId variant);

}  // namespace covpose

#endif  // COVPOSE_CONFIG_HPP
