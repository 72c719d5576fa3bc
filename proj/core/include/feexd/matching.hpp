#pragma once

#include <map>
#include <vector>

namespace feexd::matching {

/// Distillation weights for one student client: k on the probability
/// simplex, aligned with client_ids; c holds the cosine similarities the
/// solve saw; mu is the uniformity regularizer.
struct TeacherWeights {
  std::vector<double> k;
  std::vector<int> client_ids;
  double mu = 0.0;
  std::vector<double> c;
};

/// c_i = cos(v_i, v_s) over every registered client i (self included, so
/// c_s = 1), ids ascending. Returns (ids, c) pairs via TeacherWeights with
/// k left empty.
TeacherWeights sim_vector(int student_client,
                          const std::map<int, std::vector<double>> &exit_registry);

/// Euclidean projection onto the probability simplex (sort-and-threshold).
std::vector<double> simplex_project(const std::vector<double> &v);

/// argmax_k k.c - mu*||k - 1/n||^2 on the simplex, solved exactly as
/// simplex_project(1/n + c/(2 mu)).
std::vector<double> solve_weights(const std::vector<double> &c, double mu);

/// Fills tw.k from tw.c and tw.mu.
void solve_weights(TeacherWeights &tw);

/// Projected-gradient ascent on the same objective, run to 1e-10 objective
/// stability, with an independent bisection-based projection. Test oracle.
std::vector<double> brute_force_qp(const std::vector<double> &c, double mu);

/// k.c - mu*||k - 1/n||^2, the quantity both solvers maximize.
double qp_objective(const std::vector<double> &k, const std::vector<double> &c,
                    double mu);

}  // namespace feexd::matching
