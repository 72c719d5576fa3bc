#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <stdexcept>

#include "feexd/distill.hpp"
#include "feexd/model.hpp"
#include "feexd/ops.hpp"

using namespace feexd;
using namespace feexd::distill;

namespace {

model::ArchSpec arch234() {
  model::ArchSpec a;
  a.input_dim = 2;
  a.hidden_dims = {3, 4};
  a.num_classes = 2;
  return a;
}

Tensor input(int n, int d) {
  Tensor x({n, d});
  for (int i = 0; i < n * d; ++i) x.data[i] = std::cos(1.3 * i) + 0.1;
  return x;
}

}  // namespace

TEST_CASE("aggregation is the k-weighted parameter average") {
  model::EENParams mdl = model::init_model(arch234(), 4);
  std::map<int, model::Affine> heads;
  heads[1] = {Tensor::matrix(4, 2, {1, 0, 0, 1, 1, 0, 0, 1}),
              Tensor::vec({1, 2})};
  heads[5] = {Tensor::matrix(4, 2, {3, 0, 0, 3, 3, 0, 0, 3}),
              Tensor::vec({5, 6})};
  AggregatedTeacher t =
      aggregate_teacher(heads, {0.25, 0.75}, {1, 5}, mdl.blocks);
  CHECK(t.frozen);
  CHECK(t.head.W.data[0] == doctest::Approx(0.25 * 1 + 0.75 * 3));
  CHECK(t.head.W.data[1] == 0.0);
  CHECK(t.head.b.data[0] == doctest::Approx(0.25 * 1 + 0.75 * 5));
  CHECK(t.head.b.data[1] == doctest::Approx(0.25 * 2 + 0.75 * 6));
  CHECK(t.backbone_ref.size() == mdl.blocks.size());

  CHECK_THROWS_AS(aggregate_teacher(heads, {0.5, 0.6}, {1, 5}, mdl.blocks),
                  std::invalid_argument);  // not a distribution
  CHECK_THROWS_AS(aggregate_teacher(heads, {-0.1, 1.1}, {1, 5}, mdl.blocks),
                  std::invalid_argument);
  CHECK_THROWS_AS(aggregate_teacher(heads, {1.0}, {7}, mdl.blocks),
                  std::invalid_argument);  // unknown client id
}

TEST_CASE("teacher probabilities use the frozen backbone") {
  model::EENParams mdl = model::init_model(arch234(), 8);
  std::map<int, model::Affine> heads;
  heads[0] = {mdl.exits[1].W, mdl.exits[1].b};
  AggregatedTeacher t = aggregate_teacher(heads, {1.0}, {0}, mdl.blocks);
  const Tensor x = input(3, 2);
  const Tensor probs = teacher_probs(t, x);
  // with the student's own head and backbone this is exit-2's distribution
  CHECK(probs.data == model::forward_to_exit(mdl, x, 2).data);

  // mutate the student afterwards: the teacher holds its own snapshot
  for (double &v : mdl.blocks[0].W.data) v += 10.0;
  for (double &v : mdl.exits[1].W.data) v -= 5.0;
  CHECK(teacher_probs(t, x).data == probs.data);
}

TEST_CASE("probability mixture oracle") {
  // two heads engineered so exit distributions are [0.8,0.2] and [0.4,0.6]
  model::ArchSpec a = arch234();
  model::EENParams mdl = model::init_model(a, 3);
  const Tensor x = input(1, 2);
  const Tensor feats = model::forward_features(mdl, x, 2);

  auto head_for = [&](double p0) {
    // logits independent of features: zero W, bias log(p)
    model::Affine h;
    h.W = Tensor({4, 2});
    h.b = Tensor::vec({std::log(p0), std::log(1 - p0)});
    return h;
  };
  std::map<int, model::Affine> heads;
  heads[1] = head_for(0.8);
  heads[2] = head_for(0.4);
  const Tensor mix =
      mixture_teacher_probs(heads, {0.5, 0.5}, {1, 2}, mdl.blocks, x);
  CHECK(mix.data[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(mix.data[1] == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("distillation loss is the plain KL sum over selected exits") {
  model::ArchSpec a = arch234();
  model::EENParams mdl = model::init_model(a, 12);
  std::map<int, model::Affine> heads;
  heads[3] = {mdl.exits[1].W, mdl.exits[1].b};
  AggregatedTeacher t = aggregate_teacher(heads, {1.0}, {3}, mdl.blocks);
  model::Batch batch{input(4, 2), {0, 1, 1, 0}};

  const Tensor pbar = teacher_probs(t, batch.x);
  double expect = 0.0;
  for (int j : {1, 2})
    expect += kl_divergence(pbar, model::forward_to_exit(mdl, batch.x, j));
  CHECK(xkd_loss(mdl, t, batch, {1, 2}) ==
        doctest::Approx(expect).epsilon(1e-14));

  // the teacher equals the student's own exit 2, so that term vanishes
  CHECK(xkd_loss(mdl, t, batch, {2}) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("local objective composes joint loss and distillation") {
  model::ArchSpec a = arch234();
  model::EENParams mdl = model::init_model(a, 5);
  std::map<int, model::Affine> heads;
  heads[9] = {mdl.exits[1].W, mdl.exits[1].b};
  for (double &v : heads[9].b.data) v += 0.3;
  AggregatedTeacher t = aggregate_teacher(heads, {1.0}, {9}, mdl.blocks);
  model::Batch batch{input(3, 2), {1, 0, 1}};
  const std::vector<int> S{1, 2};
  const model::ExitWeights w = model::make_exit_weights(2, S, true);

  const double lam = 0.8;
  CHECK(local_objective(mdl, &t, batch, S, w, lam) ==
        doctest::Approx(model::joint_loss(mdl, batch, S, w) +
                        lam * xkd_loss(mdl, t, batch, S))
            .epsilon(1e-14));

  // lambda 0 needs no teacher at all
  CHECK(local_objective(mdl, nullptr, batch, S, w, 0.0) ==
        doctest::Approx(model::joint_loss(mdl, batch, S, w)));
  CHECK_THROWS_AS(local_objective(mdl, nullptr, batch, S, w, 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(local_objective(mdl, &t, batch, S, w, -0.1),
                  std::invalid_argument);
}

TEST_CASE("gradients cover exactly the forward path") {
  model::ArchSpec a;
  a.input_dim = 3;
  a.hidden_dims = {4, 4, 4};
  a.num_classes = 3;
  model::EENParams mdl = model::init_model(a, 6);
  std::map<int, model::Affine> heads;
  heads[0] = {mdl.exits[2].W, mdl.exits[2].b};
  AggregatedTeacher t = aggregate_teacher(heads, {1.0}, {0}, mdl.blocks);
  model::Batch batch{input(2, 3), {0, 2}};

  SUBCASE("shallow set leaves deep blocks out") {
    const std::vector<int> S{1, 2};
    const auto og = objective_grads(
        mdl, &t, batch, S, model::make_exit_weights(3, S, true), 1.0);
    CHECK(og.grads.contains("block1.W"));
    CHECK(og.grads.contains("block2.W"));
    CHECK_FALSE(og.grads.contains("block3.W"));  // never touched forward
    CHECK(og.grads.contains("exit1.W"));
    CHECK(og.grads.contains("exit2.b"));
    CHECK_FALSE(og.grads.contains("exit3.W"));  // not selected
  }

  SUBCASE("value matches the pure objective") {
    const std::vector<int> S{2, 3};
    const auto w = model::make_exit_weights(3, S, true);
    const auto og = objective_grads(mdl, &t, batch, S, w, 0.7);
    CHECK(og.loss ==
          doctest::Approx(local_objective(mdl, &t, batch, S, w, 0.7))
              .epsilon(1e-14));
    CHECK(og.grads.contains("block3.W"));
    CHECK_FALSE(og.grads.contains("exit1.W"));
  }

  SUBCASE("lambda zero never evaluates the teacher") {
    const std::vector<int> S{1};
    const auto og = objective_grads(
        mdl, nullptr, batch, S, model::make_exit_weights(3, S, true), 0.0);
    CHECK(og.grads.contains("exit1.W"));
    CHECK(og.grads.contains("block1.W"));
    CHECK(og.grads.size() == 4);
  }
}
