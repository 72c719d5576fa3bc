#include "feexd/distill.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "feexd/autodiff.hpp"
#include "feexd/ops.hpp"

namespace feexd::distill {

namespace {

void check_simplex(const std::vector<double> &k) {
  double sum = 0.0;
  for (double v : k) {
    if (v < -1e-12) throw std::invalid_argument("teacher weights must be >= 0");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("teacher weights must sum to 1");
}

Tensor backbone_features(const std::vector<model::Affine> &backbone,
                         const Tensor &x) {
  Tensor a = x;
  for (const auto &blk : backbone) a = relu(affine_forward(a, blk.W, blk.b));
  return a;
}

}  // namespace

AggregatedTeacher aggregate_teacher(
    const std::map<int, model::Affine> &final_exits,
    const std::vector<double> &k, const std::vector<int> &client_ids,
    const std::vector<model::Affine> &backbone) {
  if (k.size() != client_ids.size())
    throw std::invalid_argument("aggregate_teacher: k/client_ids length mismatch");
  if (k.empty()) throw std::invalid_argument("aggregate_teacher: empty weights");
  check_simplex(k);

  AggregatedTeacher t;
  t.backbone_ref = backbone;
  bool first = true;
  for (size_t i = 0; i < client_ids.size(); ++i) {
    const auto it = final_exits.find(client_ids[i]);
    if (it == final_exits.end())
      throw std::invalid_argument("aggregate_teacher: no exit for client " +
                                  std::to_string(client_ids[i]));
    const model::Affine &h = it->second;
    if (first) {
      t.head.W = Tensor(h.W.shape);
      t.head.b = Tensor(h.b.shape);
      first = false;
    } else if (!t.head.W.same_shape(h.W) || !t.head.b.same_shape(h.b)) {
      throw std::invalid_argument("aggregate_teacher: exit shape mismatch");
    }
    for (size_t j = 0; j < h.W.data.size(); ++j)
      t.head.W.data[j] += k[i] * h.W.data[j];
    for (size_t j = 0; j < h.b.data.size(); ++j)
      t.head.b.data[j] += k[i] * h.b.data[j];
  }
  return t;
}

Tensor teacher_probs(const AggregatedTeacher &teacher, const Tensor &x) {
  const Tensor feats = backbone_features(teacher.backbone_ref, x);
  return softmax(affine_forward(feats, teacher.head.W, teacher.head.b));
}

double xkd_loss(const model::EENParams &mdl, const AggregatedTeacher &teacher,
                const model::Batch &batch, const std::vector<int> &exit_set) {
  model::check_exit_set(exit_set, mdl.arch.m());
  const Tensor pbar = teacher_probs(teacher, batch.x);
  double loss = 0.0;
  Tensor a = batch.x;
  int depth = 0;
  for (int j : exit_set) {
    while (depth < j) {
      a = relu(affine_forward(a, mdl.blocks[depth].W, mdl.blocks[depth].b));
      ++depth;
    }
    const Tensor q =
        softmax(affine_forward(a, mdl.exits[j - 1].W, mdl.exits[j - 1].b));
    loss += kl_divergence(pbar, q);
  }
  return loss;
}

double local_objective(const model::EENParams &mdl,
                       const AggregatedTeacher *teacher,
                       const model::Batch &batch,
                       const std::vector<int> &exit_set,
                       const model::ExitWeights &w, double lambda) {
  if (lambda < 0.0)
    throw std::invalid_argument("local_objective: lambda must be >= 0");
  double loss = model::joint_loss(mdl, batch, exit_set, w);
  if (lambda > 0.0) {
    if (!teacher)
      throw std::invalid_argument("local_objective: lambda > 0 needs a teacher");
    loss += lambda * xkd_loss(mdl, *teacher, batch, exit_set);
  }
  return loss;
}

ObjectiveGrads objective_grads(const model::EENParams &mdl,
                               const AggregatedTeacher *teacher,
                               const model::Batch &batch,
                               const std::vector<int> &exit_set,
                               const model::ExitWeights &w, double lambda) {
  const int m = mdl.arch.m();
  model::check_exit_set(exit_set, m);
  if (w.w.size() != static_cast<size_t>(m))
    throw std::invalid_argument("objective_grads: weight vector size != m");
  if (lambda < 0.0)
    throw std::invalid_argument("objective_grads: lambda must be >= 0");
  if (lambda > 0.0 && !teacher)
    throw std::invalid_argument("objective_grads: lambda > 0 needs a teacher");

  const int max_depth = exit_set.back();

  Tape tape;
  const Var x = tape.leaf(batch.x, false);
  std::vector<std::pair<Var, Var>> block_vars;
  for (int bidx = 0; bidx < max_depth; ++bidx)
    block_vars.push_back({tape.leaf(mdl.blocks[bidx].W, true),
                          tape.leaf(mdl.blocks[bidx].b, true)});
  std::map<int, std::pair<Var, Var>> exit_vars;
  for (int j : exit_set)
    exit_vars[j] = {tape.leaf(mdl.exits[j - 1].W, true),
                    tape.leaf(mdl.exits[j - 1].b, true)};

  Var pbar_leaf{};
  if (lambda > 0.0)
    pbar_leaf = tape.leaf(teacher_probs(*teacher, batch.x), false);

  Var ce_sum{}, kd_sum{};
  bool have_ce = false, have_kd = false;
  Var a = x;
  int depth = 0;
  for (int j : exit_set) {
    while (depth < j) {
      a = tape.relu(
          tape.affine(a, block_vars[depth].first, block_vars[depth].second));
      ++depth;
    }
    const Var probs = tape.softmax(
        tape.affine(a, exit_vars[j].first, exit_vars[j].second));
    const Var ce =
        tape.scale(tape.cross_entropy(probs, batch.y), w.w[j - 1]);
    ce_sum = have_ce ? tape.add(ce_sum, ce) : ce;
    have_ce = true;
    if (lambda > 0.0) {
      const Var kd = tape.kl_divergence(pbar_leaf, probs);
      kd_sum = have_kd ? tape.add(kd_sum, kd) : kd;
      have_kd = true;
    }
  }
  const Var total =
      have_kd ? tape.add(ce_sum, tape.scale(kd_sum, lambda)) : ce_sum;
  tape.backward(total);

  ObjectiveGrads out;
  out.loss = tape.value(total).data[0];
  for (int bidx = 0; bidx < max_depth; ++bidx) {
    const std::string base = "block" + std::to_string(bidx + 1);
    out.grads.add(base + ".W", tape.grad(block_vars[bidx].first));
    out.grads.add(base + ".b", tape.grad(block_vars[bidx].second));
  }
  for (int j : exit_set) {
    const std::string base = "exit" + std::to_string(j);
    out.grads.add(base + ".W", tape.grad(exit_vars[j].first));
    out.grads.add(base + ".b", tape.grad(exit_vars[j].second));
  }
  return out;
}

Tensor mixture_teacher_probs(const std::map<int, model::Affine> &final_exits,
                             const std::vector<double> &k,
                             const std::vector<int> &client_ids,
                             const std::vector<model::Affine> &backbone,
                             const Tensor &x) {
  if (k.size() != client_ids.size())
    throw std::invalid_argument("mixture_teacher_probs: k/client_ids mismatch");
  check_simplex(k);
  const Tensor feats = backbone_features(backbone, x);
  Tensor mix;
  bool first = true;
  for (size_t i = 0; i < client_ids.size(); ++i) {
    const auto it = final_exits.find(client_ids[i]);
    if (it == final_exits.end())
      throw std::invalid_argument("mixture_teacher_probs: no exit for client " +
                                  std::to_string(client_ids[i]));
    const Tensor p =
        softmax(affine_forward(feats, it->second.W, it->second.b));
    if (first) {
      mix = Tensor(p.shape);
      first = false;
    }
    for (size_t j = 0; j < p.data.size(); ++j) mix.data[j] += k[i] * p.data[j];
  }
  return mix;
}

}  // namespace feexd::distill
