#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <stdexcept>
#include <vector>

#include "feexd/selection.hpp"

using namespace feexd::selection;

namespace {

std::map<int, std::vector<double>> orthogonal_registry(int n) {
  // pairwise cosine 0 -> every off-diagonal penalty clips to 0
  std::map<int, std::vector<double>> reg;
  for (int i = 0; i < n; ++i) {
    std::vector<double> v(n, 0.0);
    v[i] = 1.0;
    reg[i] = v;
  }
  return reg;
}

}  // namespace

TEST_CASE("student ratio schedule") {
  CHECK(student_ratio(1, 4) == doctest::Approx(0.5));
  CHECK(student_ratio(2, 4) == doctest::Approx(1.0));
  CHECK(student_ratio(3, 4) == doctest::Approx(1.0));  // capped
  CHECK(student_ratio(4, 4) == doctest::Approx(1.0));
  CHECK(student_ratio(1, 10) == doctest::Approx(0.2));
  CHECK_THROWS_AS(student_ratio(0, 4), std::invalid_argument);
  CHECK_THROWS_AS(student_ratio(5, 4), std::invalid_argument);
  CHECK_THROWS_AS(student_ratio(1, 0), std::invalid_argument);
}

TEST_CASE("similarity matrix clips positives and zeroes the diagonal") {
  std::map<int, std::vector<double>> reg;
  reg[1] = {1.0, 0.0};
  reg[2] = {-1.0, 0.01};
  reg[3] = {0.0, 1.0};
  reg[4] = {0.5, 0.5};
  SimilarityMatrix sm = similarity_matrix(reg, {1, 2, 3, 4});
  CHECK(sm.ids == std::vector<int>{1, 2, 3, 4});
  CHECK(sm.at(1, 1) == 0.0);
  CHECK(sm.at(1, 2) == doctest::Approx(-0.99995).epsilon(1e-4));
  CHECK(sm.at(2, 1) == sm.at(1, 2));
  CHECK(sm.at(1, 3) == 0.0);   // orthogonal
  CHECK(sm.at(1, 4) == 0.0);   // positive cosine clips to zero
  CHECK(sm.at(2, 4) == doctest::Approx(-0.7).epsilon(0.01));
  for (int a : sm.ids)
    for (int b : sm.ids) CHECK(sm.at(a, b) <= 0.0);
  CHECK_THROWS_AS(sm.index_of(9), std::out_of_range);

  // subset of the registry is allowed; registry entries must exist
  SimilarityMatrix sub = similarity_matrix(reg, {1, 3});
  CHECK(sub.ids == std::vector<int>{1, 3});
  CHECK_THROWS_AS(similarity_matrix(reg, {1, 9}), std::out_of_range);
}

TEST_CASE("greedy removes the strongest conflict and matches brute force") {
  std::map<int, std::vector<double>> reg;
  reg[1] = {1.0, 0.0};
  reg[2] = {-1.0, 0.01};  // conflicts with 1 (hard) and 4 (medium)
  reg[3] = {0.0, 1.0};
  reg[4] = {0.5, 0.5};
  SimilarityMatrix sm = similarity_matrix(reg, {1, 2, 3, 4});

  const std::vector<int> kept = greedy_prune({1, 2, 3, 4}, sm, 3);
  CHECK(kept == std::vector<int>{1, 3, 4});
  CHECK(brute_force_select({1, 2, 3, 4}, sm, 3) == kept);
  CHECK(keep_objective(kept, sm) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(keep_objective({1, 2, 3}, sm) < -1.9);

  CHECK(greedy_prune({1, 2, 3, 4}, sm, 4) == std::vector<int>{1, 2, 3, 4});
  CHECK_THROWS_AS(greedy_prune({1, 2}, sm, 3), std::invalid_argument);
  CHECK_THROWS_AS(greedy_prune({1, 2}, sm, -1), std::invalid_argument);
}

TEST_CASE("conflict-free candidates keep the lowest ids") {
  auto reg = orthogonal_registry(8);
  std::vector<int> ids;
  for (int i = 0; i < 8; ++i) ids.push_back(i);
  SimilarityMatrix sm = similarity_matrix(reg, ids);
  CHECK(greedy_prune(ids, sm, 3) == std::vector<int>{0, 1, 2});
  CHECK(greedy_prune(ids, sm, 1) == std::vector<int>{0});
}

TEST_CASE("depth schedule hits the frozen arithmetic case") {
  // m=4, 10 clients, ratio 1/2: 15 student slots, depth 1, frontier 5
  auto reg = orthogonal_registry(10);
  std::vector<int> sampled;
  for (int i = 0; i < 10; ++i) sampled.push_back(i);
  SimilarityMatrix sm = similarity_matrix(reg, sampled);

  RoundPlan plan = select_students(sampled, 1, 4, 4, sm);
  CHECK(plan.round == 1);
  CHECK(plan.ratio == doctest::Approx(0.5));
  CHECK(plan.depth_L == 1);
  CHECK(plan.frontier_K == 5);

  int students = 0, frontier = 0;
  for (const auto &[id, exits] : plan.students) {
    CHECK(exits.back() == 4);  // final exit everywhere
    CHECK(exits.front() == 1);  // depth 1 everywhere
    for (size_t i = 1; i < exits.size(); ++i) CHECK(exits[i - 1] < exits[i]);
    students += static_cast<int>(exits.size()) - 1;
    bool has2 = false;
    for (int e : exits) has2 = has2 || e == 2;
    frontier += has2 ? 1 : 0;
  }
  CHECK(students == 15);
  CHECK(frontier == 5);
  // zero conflict everywhere -> the five lowest ids hold the frontier exit
  for (int id = 0; id < 5; ++id)
    CHECK(plan.students.at(id) == std::vector<int>{1, 2, 4});
  for (int id = 5; id < 10; ++id)
    CHECK(plan.students.at(id) == std::vector<int>{1, 4});
}

TEST_CASE("late rounds train every exit") {
  auto reg = orthogonal_registry(3);
  SimilarityMatrix sm = similarity_matrix(reg, {0, 1, 2});
  RoundPlan plan = select_students({0, 1, 2}, 4, 4, 4, sm);  // ratio 1
  CHECK(plan.depth_L == 3);
  CHECK(plan.frontier_K == 0);
  for (const auto &[id, exits] : plan.students)
    CHECK(exits == std::vector<int>{1, 2, 3, 4});
}

TEST_CASE("a full frontier folds into one more shared depth") {
  // m=6, 2 clients, t=7/T=40: the rounded slot count covers every client at
  // depth 2, so the frontier collapses to zero rather than K == |sampled|
  auto reg = orthogonal_registry(2);
  SimilarityMatrix sm = similarity_matrix(reg, {0, 1});
  RoundPlan plan = select_students({0, 1}, 7, 40, 6, sm);
  CHECK(plan.depth_L == 2);
  CHECK(plan.frontier_K == 0);
  for (const auto &[id, exits] : plan.students)
    CHECK(exits == std::vector<int>{1, 2, 6});
  CHECK(plan.frontier_K < 2);
}

TEST_CASE("tiny ratios still schedule the final exit") {
  auto reg = orthogonal_registry(4);
  SimilarityMatrix sm = similarity_matrix(reg, {0, 1, 2, 3});
  RoundPlan plan = select_students({0, 1, 2, 3}, 1, 1000, 3, sm);
  CHECK(plan.depth_L == 0);
  for (const auto &[id, exits] : plan.students) {
    CHECK(exits.back() == 3);
    CHECK(exits.size() >= 1);
  }
}

TEST_CASE("full plan ignores the schedule") {
  RoundPlan plan = full_plan({3, 7}, 5, 3);
  CHECK(plan.round == 5);
  CHECK(plan.ratio == doctest::Approx(1.0));
  CHECK(plan.depth_L == 2);
  CHECK(plan.frontier_K == 0);
  CHECK(plan.students.at(3) == std::vector<int>{1, 2, 3});
  CHECK(plan.students.at(7) == std::vector<int>{1, 2, 3});
}

TEST_CASE("plan json round trip") {
  RoundPlan plan;
  plan.round = 9;
  plan.ratio = 0.45;
  plan.depth_L = 1;
  plan.frontier_K = 2;
  plan.students[4] = {1, 2, 5};
  plan.students[11] = {1, 5};
  const std::string text = plan_to_json(plan);
  RoundPlan back = plan_from_json(text);
  CHECK(back.round == plan.round);
  CHECK(back.ratio == plan.ratio);
  CHECK(back.depth_L == plan.depth_L);
  CHECK(back.frontier_K == plan.frontier_K);
  CHECK(back.students == plan.students);
  CHECK_THROWS(plan_from_json("{not json"));
  CHECK_THROWS(plan_from_json("{\"round\": 1}"));
}
