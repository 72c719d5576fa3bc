#pragma once

#include <vector>

#include "feexd/tensor.hpp"

namespace feexd::model {

/// Stack shape: input -> hidden_dims[0] -> ... -> hidden_dims[m-1], with one
/// classifier ("exit") attached after every block.
struct ArchSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int num_classes = 0;

  int m() const { return static_cast<int>(hidden_dims.size()); }
  /// Throws std::invalid_argument unless m >= 2 and all dims positive.
  void validate() const;
};

struct Affine {
  Tensor W;  // [d_in x d_out]
  Tensor b;  // [d_out]
};

/// The multi-exit network: block j = affine + ReLU, exit j = affine from
/// block j's activation to class logits. Exit m is the "final exit" shared
/// with the server; exits 1..m-1 stay personal.
struct EENParams {
  ArchSpec arch;
  std::vector<Affine> blocks;
  std::vector<Affine> exits;
};

/// Per-exit loss weights, index j-1 for exit j.
struct ExitWeights {
  std::vector<double> w;
};

struct Batch {
  Tensor x;
  std::vector<int> y;
};

/// Xavier-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases;
/// bit-reproducible per seed.
EENParams init_model(const ArchSpec &spec, uint64_t seed);

/// Activations after blocks 1..j (ReLU applied). x: [N x input_dim].
Tensor forward_features(const EENParams &model, const Tensor &x, int j);

/// softmax(exit_j(block_j(...block_1(x)))). Blocks deeper than j are never
/// evaluated. 1 <= j <= m.
Tensor forward_to_exit(const EENParams &model, const Tensor &x, int j);

/// All m exit distributions from one pass over the blocks.
std::vector<Tensor> forward_all_exits(const EENParams &model, const Tensor &x);

/// Uniform weights over the active exit set: 1/|S| on S when renormalize,
/// else 1/m everywhere (so partial sets sum below 1).
ExitWeights make_exit_weights(int m, const std::vector<int> &exit_set,
                              bool renormalize);

/// sum_{j in S} w_j * cross_entropy at exit j. S: sorted 1-based exit ids.
double joint_loss(const EENParams &model, const Batch &batch,
                  const std::vector<int> &exit_set, const ExitWeights &w);

/// Exit j's parameters as one flat vector: W row-major, then b.
std::vector<double> flatten_exit(const EENParams &model, int j);
std::vector<double> flatten_head(const Tensor &W, const Tensor &b);

/// Named-tensor view for checkpoints and aggregation: block1.W, block1.b,
/// ..., exit1.W, ... in that fixed order.
ParamSet model_to_params(const EENParams &model);
EENParams params_to_model(const ArchSpec &spec, const ParamSet &ps);

/// Validates S: nonempty, sorted, unique, each in [1, m].
void check_exit_set(const std::vector<int> &exit_set, int m);

}  // namespace feexd::model
