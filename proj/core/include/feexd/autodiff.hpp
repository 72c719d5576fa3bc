#pragma once

#include <vector>

#include "feexd/tensor.hpp"

namespace feexd {

/// Handle into a Tape. Cheap to copy; only valid for the tape that made it.
struct Var {
  int id = -1;
};

/// Reverse-mode tape over dense float64 tensors. Build a forward graph with
/// the member ops, call backward() on a scalar, then read grad() off the
/// leaves. Nodes whose inputs all have requires_grad=false are skipped during
/// the reverse sweep, so frozen subgraphs (e.g. teacher outputs) cost nothing.
class Tape {
 public:
  Var leaf(const Tensor &value, bool requires_grad);

  // y = x W + b (row-wise); see ops.hpp for shape rules.
  Var affine(Var x, Var w, Var b);
  Var relu(Var x);
  Var softmax(Var logits);

  // Scalar losses; both return shape-{1} vars. Semantics match the pure ops.
  Var cross_entropy(Var probs, const std::vector<int> &labels);
  Var kl_divergence(Var p, Var q);

  Var add(Var a, Var b);
  Var scale(Var a, double factor);
  Var sum(Var a);

  const Tensor &value(Var v) const;
  /// Gradient of the last backward() root w.r.t. v. Throws if v did not
  /// require grad or backward() has not run.
  const Tensor &grad(Var v) const;
  bool requires_grad(Var v) const;

  /// Reverse sweep from a scalar root. Clears previous gradients.
  void backward(Var root);

  size_t size() const { return nodes_.size(); }

 private:
  enum class Op { leaf, affine, relu, softmax, cross_entropy, kl_divergence, add, scale, sum };

  struct Node {
    Op op;
    std::vector<int> inputs;
    Tensor value;
    bool requires_grad = false;
    bool has_grad = false;
    Tensor grad;
    std::vector<int> labels;  // cross_entropy only
    double factor = 1.0;      // scale only
  };

  Var push(Node node);
  Node &at(Var v);
  const Node &at(Var v) const;
  void accumulate(int id, const Tensor &g);
  void backward_into(const Node &node);

  std::vector<Node> nodes_;
};

}  // namespace feexd
