#include "feexd/selection.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <stdexcept>

#include <json.hpp>

#include "feexd/ops.hpp"

namespace feexd::selection {

int SimilarityMatrix::index_of(int client_id) const {
  const auto it = std::lower_bound(ids.begin(), ids.end(), client_id);
  if (it == ids.end() || *it != client_id)
    throw std::out_of_range("SimilarityMatrix: unknown client " +
                            std::to_string(client_id));
  return static_cast<int>(it - ids.begin());
}

double SimilarityMatrix::at(int id_a, int id_b) const {
  return delta.at(index_of(id_a), index_of(id_b));
}

double student_ratio(int t, int T) {
  if (T <= 0) throw std::invalid_argument("student_ratio: T must be positive");
  if (t < 1 || t > T)
    throw std::invalid_argument("student_ratio: t must be in [1, T]");
  return std::min(2.0 * t / T, 1.0);
}

SimilarityMatrix similarity_matrix(
    const std::map<int, std::vector<double>> &exit_registry,
    const std::vector<int> &clients) {
  SimilarityMatrix sm;
  sm.ids = clients;
  std::sort(sm.ids.begin(), sm.ids.end());
  sm.ids.erase(std::unique(sm.ids.begin(), sm.ids.end()), sm.ids.end());
  if (sm.ids.empty())
    throw std::invalid_argument("similarity_matrix: empty client set");

  std::vector<const std::vector<double> *> vecs;
  for (int id : sm.ids) {
    const auto it = exit_registry.find(id);
    if (it == exit_registry.end())
      throw std::out_of_range("similarity_matrix: no registry entry for client " +
                              std::to_string(id));
    vecs.push_back(&it->second);
  }
  const int n = static_cast<int>(sm.ids.size());
  sm.delta = Tensor({n, n});
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double d = std::min(0.0, cosine_similarity(*vecs[i], *vecs[j]));
      sm.delta.data[i * n + j] = d;
      sm.delta.data[j * n + i] = d;
    }
  return sm;
}

std::vector<int> greedy_prune(const std::vector<int> &candidates,
                              const SimilarityMatrix &delta, int K) {
  if (K < 0 || K > static_cast<int>(candidates.size()))
    throw std::invalid_argument("greedy_prune: K outside [0, |candidates|]");
  std::vector<int> kept = candidates;
  std::sort(kept.begin(), kept.end());
  for (int id : kept) delta.index_of(id);  // validate up front

  while (static_cast<int>(kept.size()) > K) {
    int worst_pos = -1;
    double worst_sum = 0.0;
    for (size_t e = 0; e < kept.size(); ++e) {
      double s = 0.0;
      for (int i : kept) s += delta.at(i, kept[e]);
      // Lower total similarity goes first; equally bad -> drop the higher id
      // so the survivors are the lowest ids.
      if (worst_pos < 0 || s < worst_sum ||
          (s == worst_sum && kept[e] > kept[worst_pos])) {
        worst_pos = static_cast<int>(e);
        worst_sum = s;
      }
    }
    kept.erase(kept.begin() + worst_pos);
  }
  return kept;
}

namespace {

RoundPlan base_plan(const std::vector<int> &sampled, int t, int m, int L,
                    double ratio) {
  RoundPlan plan;
  plan.round = t;
  plan.ratio = ratio;
  plan.depth_L = L;
  std::vector<int> base;
  for (int j = 1; j <= L; ++j) base.push_back(j);
  if (L < m) base.push_back(m);
  for (int id : sampled) plan.students[id] = base;
  return plan;
}

}  // namespace

RoundPlan select_students(const std::vector<int> &sampled, int t, int T, int m,
                          const SimilarityMatrix &delta) {
  if (sampled.empty())
    throw std::invalid_argument("select_students: no sampled clients");
  if (m < 2) throw std::invalid_argument("select_students: m must be >= 2");
  const double ratio = student_ratio(t, T);  // validates t, T

  const int64_t C = static_cast<int64_t>(sampled.size());
  const int64_t tt = std::min<int64_t>(2 * static_cast<int64_t>(t), T);
  // L = floor((m-1) R), Q = round((m-1) C R) with R = tt/T, all exact.
  int64_t L = (static_cast<int64_t>(m - 1) * tt) / T;
  const int64_t num = static_cast<int64_t>(m - 1) * C * tt;
  const int64_t Q = (2 * num + T) / (2 * static_cast<int64_t>(T));
  int64_t K = Q - C * L;
  if (K == C) {  // rounding pushed a full extra layer; fold it into L
    ++L;
    K = 0;
  }
  if (L >= m - 1) {
    L = m - 1;
    K = 0;
  }

  RoundPlan plan = base_plan(sampled, t, m, static_cast<int>(L), ratio);
  plan.frontier_K = static_cast<int>(K);
  if (K > 0) {
    const auto frontier = greedy_prune(sampled, delta, static_cast<int>(K));
    for (int id : frontier) {
      auto &s = plan.students[id];
      s.insert(std::lower_bound(s.begin(), s.end(), static_cast<int>(L) + 1),
               static_cast<int>(L) + 1);
    }
  }
  return plan;
}

RoundPlan full_plan(const std::vector<int> &sampled, int t, int m) {
  if (sampled.empty()) throw std::invalid_argument("full_plan: no sampled clients");
  if (m < 2) throw std::invalid_argument("full_plan: m must be >= 2");
  return base_plan(sampled, t, m, m - 1, 1.0);
}

double keep_objective(const std::vector<int> &kept,
                      const SimilarityMatrix &delta) {
  double obj = 0.0;
  for (int i : kept)
    for (int j : kept) obj += delta.at(i, j);
  return obj;
}

std::vector<int> brute_force_select(const std::vector<int> &candidates,
                                    const SimilarityMatrix &delta, int K) {
  const int n = static_cast<int>(candidates.size());
  if (n > 15)
    throw std::invalid_argument("brute_force_select: candidate set too large");
  if (K < 0 || K > n)
    throw std::invalid_argument("brute_force_select: K outside [0, n]");
  std::vector<int> sorted = candidates;
  std::sort(sorted.begin(), sorted.end());

  std::vector<int> best;
  double best_obj = 0.0;
  bool found = false;
  for (uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != K) continue;
    std::vector<int> subset;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) subset.push_back(sorted[i]);
    const double obj = keep_objective(subset, delta);
    if (!found || obj > best_obj) {
      found = true;
      best_obj = obj;
      best = subset;
    }
  }
  return best;
}

std::string plan_to_json(const RoundPlan &plan) {
  nlohmann::json j;
  j["round"] = plan.round;
  j["ratio"] = plan.ratio;
  j["depth_L"] = plan.depth_L;
  j["frontier_K"] = plan.frontier_K;
  j["students"] = nlohmann::json::object();
  for (const auto &[id, exits] : plan.students)
    j["students"][std::to_string(id)] = exits;
  return j.dump();
}

RoundPlan plan_from_json(const std::string &text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  RoundPlan plan;
  plan.round = j.at("round").get<int>();
  plan.ratio = j.at("ratio").get<double>();
  plan.depth_L = j.at("depth_L").get<int>();
  plan.frontier_K = j.at("frontier_K").get<int>();
  for (const auto &[key, val] : j.at("students").items())
    plan.students[std::stoi(key)] = val.get<std::vector<int>>();
  return plan;
}

}  // namespace feexd::selection
