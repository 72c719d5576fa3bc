#pragma once

#include <map>
#include <string>
#include <vector>

#include "feexd/tensor.hpp"

namespace feexd::selection {

/// Pairwise clipped cosine similarity over a client set: delta[i][j] =
/// min(0, cos(v_i, v_j)) for i != j, 0 on the diagonal. Symmetric, all
/// entries <= 0. Rows/cols follow ids (sorted ascending).
struct SimilarityMatrix {
  std::vector<int> ids;
  Tensor delta;  // [n x n]

  int index_of(int client_id) const;  // throws std::out_of_range if absent
  double at(int id_a, int id_b) const;
};

/// Which exits train where this round. Every student set contains the final
/// exit m; depths 1..depth_L are in every set; exactly frontier_K clients
/// additionally hold depth_L+1 (frontier_K < number of sampled clients).
struct RoundPlan {
  int round = 0;
  double ratio = 0.0;
  int depth_L = 0;
  int frontier_K = 0;
  std::map<int, std::vector<int>> students;
};

std::string plan_to_json(const RoundPlan &plan);
RoundPlan plan_from_json(const std::string &text);

/// Fraction of non-final exits active as students in round t: min(2t/T, 1).
double student_ratio(int t, int T);

/// Registry maps client id -> flattened final-exit parameters.
SimilarityMatrix similarity_matrix(
    const std::map<int, std::vector<double>> &exit_registry,
    const std::vector<int> &clients);

/// Repeatedly removes e = argmin_{e in E} sum_{i in E} delta_ie until
/// |E| = K; on ties the higher id goes, so low ids survive. Returns the
/// kept ids, sorted.
std::vector<int> greedy_prune(const std::vector<int> &candidates,
                              const SimilarityMatrix &delta, int K);

/// Depth-prioritized selection: every sampled client trains {1..L} plus m;
/// K of them (greedy-pruned for mutual similarity) also train depth L+1,
/// where L = floor((m-1) R(t)) and the total student count is
/// Q = round((m-1) |sampled| R(t)). Exact integer arithmetic throughout.
RoundPlan select_students(const std::vector<int> &sampled, int t, int T, int m,
                          const SimilarityMatrix &delta);

/// Plan with every exit active for every client (ratio treated as 1).
RoundPlan full_plan(const std::vector<int> &sampled, int t, int m);

/// sum_{i in E} sum_{j in E} delta_ij, the objective kept ids maximize.
double keep_objective(const std::vector<int> &kept,
                      const SimilarityMatrix &delta);

/// Exhaustive argmax of keep_objective over size-K subsets; |candidates|
/// <= 15. Test oracle for the greedy guarantee.
std::vector<int> brute_force_select(const std::vector<int> &candidates,
                                    const SimilarityMatrix &delta, int K);

}  // namespace feexd::selection
