#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "feexd/tensor.hpp"

namespace feexd::data {

struct Dataset {
  Tensor features;  // [N x d]
  std::vector<int> labels;
  int num_classes = 0;

  int size() const { return static_cast<int>(labels.size()); }
  int dim() const { return features.cols(); }
  /// Throws std::invalid_argument on empty data or out-of-range labels.
  void validate() const;
};

struct ClientPartition {
  int client_id = 0;
  Dataset train;
  Dataset test;
  double p = 0.0;  // aggregation weight, train-size share
};

/// Per class: a random unit mean scaled by class_sep plus unit Gaussian
/// noise per sample. Samples are grouped by class; bit-reproducible per seed.
Dataset generate_synthetic(int num_classes, int dim, int per_class,
                           double class_sep, uint64_t seed);

/// Class-wise Dirichlet(alpha) split over n clients. Every sample lands on
/// exactly one client; draws are redone until each client holds at least
/// min_per_client samples; each client then gets a stratified 80/20
/// train/test split. Weights p are train-size shares.
std::vector<ClientPartition> dirichlet_partition(const Dataset &ds, int n,
                                                 double alpha,
                                                 int min_per_client,
                                                 uint64_t seed);

/// Train-size shares, summing to 1.
std::vector<double> client_weights(const std::vector<ClientPartition> &parts);

/// CSV with a header row, float feature columns, and a final integer
/// `label` column.
Dataset load_csv(const std::string &path);

/// Per-class counts of ds restricted to [0, num_classes).
std::vector<int> label_histogram(const Dataset &ds);

}  // namespace feexd::data
