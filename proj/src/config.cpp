#include "covpose/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace covpose {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

void RunConfig::validate() const {
  require(lr_stiefel > 0.0 && lr_adam > 0.0, ErrorCode::ConfigError,
          "learning rates must be > 0");
  require(lambda >= 0.0, ErrorCode::ConfigError, "lambda must be >= 0");
  require(epochs >= 1, ErrorCode::ConfigError, "epochs must be >= 1");
  require(batch_size >= 1, ErrorCode::ConfigError, "batch_size must be >= 1");
  require(eps_reeig > 0.0, ErrorCode::ConfigError, "eps_reeig must be > 0");
  require(patience >= 0, ErrorCode::ConfigError, "patience must be >= 0");
  require(factor > 0.0 && factor <= 1.0, ErrorCode::ConfigError,
          "factor must be in (0, 1]");
  require(n_train >= 1 && n_val >= 1 && n_test >= 1, ErrorCode::ConfigError,
          "split sizes must be >= 1");
  variant_from_name(variant);  // throws on unknown names
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  out << "[run]\n"
      << "variant = " << c.variant << "\n"
      << "seed = " << c.seed << "\n"
      << "out_dir = " << c.out_dir << "\n"
      << "dataset_dir = " << c.dataset_dir << "\n"
      << "[dataset]\n"
      << "n_train = " << c.n_train << "\n"
      << "n_val = " << c.n_val << "\n"
      << "n_test = " << c.n_test << "\n"
      << "data_seed = " << c.data_seed << "\n"
      << "[model]\n"
      << "dims = " << join_ints(c.dims) << "\n"
      << "eps_reeig = " << fmt(c.eps_reeig) << "\n"
      << "input_size = " << c.input_size << "\n"
      << "channels = " << join_ints(c.channels) << "\n"
      << "kernel = " << c.kernel << "\n"
      << "init_scale = " << fmt(c.init_scale) << "\n"
      << "mlp_hidden = " << c.mlp_hidden << "\n"
      << "[optim]\n"
      << "lr_stiefel = " << fmt(c.lr_stiefel) << "\n"
      << "lr_adam = " << fmt(c.lr_adam) << "\n"
      << "lambda = " << fmt(c.lambda) << "\n"
      << "batch_size = " << c.batch_size << "\n"
      << "epochs = " << c.epochs << "\n"
      << "patience = " << c.patience << "\n"
      << "factor = " << fmt(c.factor) << "\n"
      << "step_trace = " << (c.step_trace ? 1 : 0) << "\n"
      << "[analysis]\n"
      << "n_pairs = " << c.n_pairs << "\n"
      << "bins = " << c.bins << "\n"
      << "analysis_seed = " << c.analysis_seed << "\n";
  return out.str();
}

RunConfig parse_config(const std::string& text) {
  return parse_config(text, RunConfig{});
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  RunConfig& c = base;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::ConfigError,
            "config line without '=': " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "variant") c.variant = value;
      else if (key == "seed") c.seed = std::stoull(value);
      else if (key == "out_dir") c.out_dir = value;
      else if (key == "dataset_dir") c.dataset_dir = value;
      else if (key == "n_train") c.n_train = std::stoi(value);
      else if (key == "n_val") c.n_val = std::stoi(value);
      else if (key == "n_test") c.n_test = std::stoi(value);
      else if (key == "data_seed") c.data_seed = std::stoull(value);
      else if (key == "dims") c.dims = split_ints(value);
      else if (key == "eps_reeig") c.eps_reeig = std::stod(value);
      else if (key == "input_size") c.input_size = std::stoi(value);
      else if (key == "channels") c.channels = split_ints(value);
      else if (key == "kernel") c.kernel = std::stoi(value);
      else if (key == "init_scale") c.init_scale = std::stod(value);
      else if (key == "mlp_hidden") c.mlp_hidden = std::stoi(value);
      else if (key == "lr_stiefel") c.lr_stiefel = std::stod(value);
      else if (key == "lr_adam") c.lr_adam = std::stod(value);
      else if (key == "lambda") c.lambda = std::stod(value);
      else if (key == "batch_size") c.batch_size = std::stoi(value);
      else if (key == "epochs") c.epochs = std::stoi(value);
      else if (key == "patience") c.patience = std::stoi(value);
      else if (key == "factor") c.factor = std::stod(value);
      else if (key == "step_trace") c.step_trace = value != "0";
      else if (key == "n_pairs") c.n_pairs = std::stoi(value);
      else if (key == "bins") c.bins = std::stoi(value);
      else if (key == "analysis_seed") c.analysis_seed = std::stoull(value);
      else throw Error(ErrorCode::ConfigError, "unknown config key: " + key);
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError,
                  "bad value for config key '" + key + "': " + value);
    }
  }
  return base;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoError, "cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void save_config_file(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot write config file " + path);
  out << serialize_config(cfg);
}

ToyBackboneConfig backbone_config_from(const RunConfig& cfg) {
  ToyBackboneConfig bb;
  bb.input_size = cfg.input_size;
  bb.channels = cfg.channels;
  bb.kernel = cfg.kernel;
  bb.init_scale = cfg.init_scale;
  bb.mlp_hidden = cfg.mlp_hidden;
  return bb;
}

DatasetConfig dataset_config_from(const RunConfig& cfg) {
  DatasetConfig d;
  d.n_train = cfg.n_train;
  d.n_val = cfg.n_val;
  d.n_test = cfg.n_test;
  d.seed = cfg.data_seed;
  return d;
}

SpdHeadConfig head_config_for_variant(const RunConfig& cfg, VariantId variant) {
  SpdHeadConfig head;
  head.dims = cfg.dims;
  head.eps_reeig = cfg.eps_reeig;
  const ToyBackboneConfig bb = backbone_config_from(cfg);
  if (variant == VariantId::ChannelCov) {
    head.dims.front() = bb.output_channels();
  } else {
    head.dims.front() = bb.spatial_covariance_dim();
  }
  if (variant == VariantId::EulerSPD3) head.dims.back() = 3;
  return head;
}

}  // namespace covpose
