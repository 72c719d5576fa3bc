#pragma once

#include <vector>

#include "feexd/tensor.hpp"

namespace feexd {

/// Floor applied to probabilities before they enter a log, keeping losses
/// finite on degenerate inputs.
inline constexpr double kProbFloor = 1e-12;

/// y = x W + b, row-wise. x: [batch x d_in], W: [d_in x d_out], b: [d_out].
Tensor affine_forward(const Tensor &x, const Tensor &w, const Tensor &b);

Tensor relu(const Tensor &x);

/// Row-wise softmax with max subtraction; every output row sums to 1.
Tensor softmax(const Tensor &logits);

/// Mean over the batch of -log(probs[i, label_i]), probabilities floored
/// at kProbFloor. Labels must lie in [0, C).
double cross_entropy(const Tensor &probs, const std::vector<int> &labels);

/// Mean over the batch of sum_c p_c log(p_c / q_c). Terms with
/// p_c <= kProbFloor contribute zero; q is floored at kProbFloor.
double kl_divergence(const Tensor &p, const Tensor &q);

/// <a,b> / (|a| |b|), clamped to [-1, 1]. Throws on zero vectors.
double cosine_similarity(const std::vector<double> &a,
                         const std::vector<double> &b);

// Plain row-major matmul kernels shared by the forward ops and the tape.
namespace detail {
// c[n x m] = a[n x k] * b[k x m]
void matmul(const double *a, const double *b, double *c, int n, int k, int m);
// c[n x k2] = a[n x m] * b[k2 x m]^T
void matmul_nt(const double *a, const double *b, double *c, int n, int m, int k2);
// c[k x m] = a[n x k]^T * b[n x m]
void matmul_tn(const double *a, const double *b, double *c, int n, int k, int m);
}  // namespace detail

}  // namespace feexd
