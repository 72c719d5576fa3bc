#pragma once

#include <cstdint>
#include <vector>

#include "feexd/data.hpp"
#include "feexd/model.hpp"

namespace feexd::infer {

/// Terminate at the first exit whose top softmax probability is strictly
/// greater than epsilon (always at exit m otherwise).
struct ExitPolicy {
  double epsilon = 0.5;
};

/// Per-layer multiply-accumulate counts; affine d_in x d_out costs
/// d_in*d_out. Evaluated-but-not-taken exits accrue cost too.
struct CostModel {
  std::vector<int64_t> macs_block;
  std::vector<int64_t> macs_exit;
};

CostModel cost_model(const model::ArchSpec &spec);

/// Cumulative MACs through exit j: all blocks 1..j plus all exit heads 1..j.
int64_t mac_count(const model::ArchSpec &spec, int j);

struct Prediction {
  int label = 0;
  int exit_index = 0;  // 1-based
  int64_t macs = 0;
};

/// x: a single sample as a [1 x d] tensor.
Prediction predict_with_policy(const model::EENParams &mdl, const Tensor &x,
                               const ExitPolicy &policy, const CostModel &cost);

struct EvalReport {
  double accuracy = 0.0;           // at the terminated exit
  double averaged_accuracy = 0.0;  // mean over per-exit accuracies
  std::vector<double> per_exit_accuracy;
  double mean_macs = 0.0;
  std::vector<int64_t> exit_histogram;
  int64_t num_samples = 0;
  int64_t num_correct = 0;  // at the terminated exit
  std::vector<int64_t> per_exit_correct;
  int64_t total_macs = 0;
};

EvalReport evaluate(const model::EENParams &mdl, const data::Dataset &testset,
                    const ExitPolicy &policy, const CostModel &cost);

/// One report per epsilon from a single forward pass over the test set.
std::vector<EvalReport> evaluate_grid(const model::EENParams &mdl,
                                      const data::Dataset &testset,
                                      const std::vector<double> &epsilons,
                                      const CostModel &cost);

/// Count-wise sum of reports (pooling test sets); derived rates recomputed.
EvalReport merge_reports(const std::vector<EvalReport> &reports);

}  // namespace feexd::infer
