#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace feexd::runner {

struct DataConfig {
  std::string kind = "synthetic";  // "synthetic" | "csv"
  int num_classes = 10;
  int dim = 32;
  int per_class = 100;
  double class_sep = 3.0;
  std::string path;  // csv only
};

/// Schema "feexd-config-1". Every field has a default, so {} is a valid
/// config; validation reports all offending fields at once.
struct ExperimentConfig {
  int n_clients = 20;
  int m_exits = 3;
  double alpha = 0.3;
  double sample_rate = 0.1;
  int rounds = 40;
  int local_epochs = 5;
  int batch = 64;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double lr_decay = 0.99;
  double lambda = 1.0;
  double mu = 0.6;
  std::vector<double> epsilon_grid = {0.1, 0.2, 0.3, 0.4, 0.5,
                                      0.6, 0.7, 0.8, 0.9};
  std::string strategy = "cafedistill";
  std::vector<int> hidden_dims = {64, 64, 64};
  DataConfig data;
  int min_per_client = 8;
  uint64_t seed = 1;
  bool w_renormalize = true;
  bool p_renormalize = true;
};

/// Parse + validate. Unknown keys and invalid values are all reported in one
/// std::invalid_argument naming each offending field.
ExperimentConfig config_from_json(const std::string &text);
ExperimentConfig load_config(const std::string &path);

std::string config_to_json(const ExperimentConfig &cfg);
void save_config(const std::string &path, const ExperimentConfig &cfg);

/// Throws std::invalid_argument listing every violated field constraint.
void validate_config(const ExperimentConfig &cfg);

}  // namespace feexd::runner
