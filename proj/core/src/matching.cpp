#include "feexd/matching.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "feexd/ops.hpp"

namespace feexd::matching {

TeacherWeights sim_vector(
    int student_client,
    const std::map<int, std::vector<double>> &exit_registry) {
  const auto self = exit_registry.find(student_client);
  if (self == exit_registry.end())
    throw std::out_of_range("sim_vector: student client " +
                            std::to_string(student_client) +
                            " not in exit registry");
  TeacherWeights tw;
  for (const auto &[id, vec] : exit_registry) {
    tw.client_ids.push_back(id);
    tw.c.push_back(cosine_similarity(vec, self->second));
  }
  return tw;
}

std::vector<double> simplex_project(const std::vector<double> &v) {
  if (v.empty()) throw std::invalid_argument("simplex_project: empty vector");
  const int n = static_cast<int>(v.size());
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, tau = 0.0;
  for (int i = 0; i < n; ++i) {
    cum += u[i];
    const double cand = (cum - 1.0) / (i + 1);
    if (u[i] - cand > 0.0) tau = cand;
  }
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = std::max(0.0, v[i] - tau);
  return out;
}

std::vector<double> solve_weights(const std::vector<double> &c, double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("solve_weights: mu must be > 0");
  if (c.empty()) throw std::invalid_argument("solve_weights: empty c");
  const int n = static_cast<int>(c.size());
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = 1.0 / n + c[i] / (2.0 * mu);
  return simplex_project(v);
}

void solve_weights(TeacherWeights &tw) { tw.k = solve_weights(tw.c, tw.mu); }

double qp_objective(const std::vector<double> &k, const std::vector<double> &c,
                    double mu) {
  const int n = static_cast<int>(c.size());
  double obj = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = k[i] - 1.0 / n;
    obj += k[i] * c[i] - mu * d * d;
  }
  return obj;
}

namespace {

// Deliberately different projection route from simplex_project: bisection on
// the threshold instead of sort-and-scan, so the oracle shares no kernel with
// the production solver.
std::vector<double> project_bisect(const std::vector<double> &v) {
  const double hi0 = *std::max_element(v.begin(), v.end());
  double lo = hi0 - 1.0, hi = hi0;
  for (int it = 0; it < 200; ++it) {
    const double tau = 0.5 * (lo + hi);
    double s = 0.0;
    for (double x : v) s += std::max(0.0, x - tau);
    (s > 1.0 ? lo : hi) = tau;
  }
  const double tau = 0.5 * (lo + hi);
  std::vector<double> out(v.size());
  double s = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    out[i] = std::max(0.0, v[i] - tau);
    s += out[i];
  }
  for (double &x : out) x /= s;  // absorb bisection residue
  return out;
}

}  // namespace

std::vector<double> brute_force_qp(const std::vector<double> &c, double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("brute_force_qp: mu must be > 0");
  if (c.empty()) throw std::invalid_argument("brute_force_qp: empty c");
  const int n = static_cast<int>(c.size());
  std::vector<double> k(n, 1.0 / n);
  const double step = 0.9 / (2.0 * mu);
  double prev = qp_objective(k, c, mu);
  // Require the 1e-10 stability to hold for a stretch of iterations, which
  // drives the iterate itself (not just the objective) to convergence.
  int stable = 0;
  for (int it = 0; it < 100000 && stable < 40; ++it) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = c[i] - 2.0 * mu * (k[i] - 1.0 / n);
    for (int i = 0; i < n; ++i) k[i] += step * g[i];
    k = project_bisect(k);
    const double obj = qp_objective(k, c, mu);
    stable = std::abs(obj - prev) < 1e-10 ? stable + 1 : 0;
    prev = obj;
  }
  return k;
}

}  // namespace feexd::matching
