#pragma once

#include <map>
#include <vector>

#include "feexd/model.hpp"
#include "feexd/tensor.hpp"

namespace feexd::distill {

/// Server-built teacher: weight-averaged final exit plus the round-start
/// global backbone its features come from. Frozen — nothing here receives
/// gradient.
struct AggregatedTeacher {
  model::Affine head;
  std::vector<model::Affine> backbone_ref;
  bool frozen = true;
};

/// Parameter-wise weighted mean of final exits under simplex weights k
/// (aligned with k.client_ids). Heads must share one shape.
AggregatedTeacher aggregate_teacher(
    const std::map<int, model::Affine> &final_exits,
    const std::vector<double> &k, const std::vector<int> &client_ids,
    const std::vector<model::Affine> &backbone);

/// softmax(head(backbone_ref features of x)); pure, no gradient anywhere.
Tensor teacher_probs(const AggregatedTeacher &teacher, const Tensor &x);

/// sum_{j in S} KL(teacher distribution || student exit-j distribution).
/// The teacher side is computed once per batch.
double xkd_loss(const model::EENParams &mdl, const AggregatedTeacher &teacher,
                const model::Batch &batch, const std::vector<int> &exit_set);

/// joint_loss + lambda * xkd_loss. teacher may be null when lambda == 0.
double local_objective(const model::EENParams &mdl,
                       const AggregatedTeacher *teacher,
                       const model::Batch &batch,
                       const std::vector<int> &exit_set,
                       const model::ExitWeights &w, double lambda);

/// Loss plus gradients w.r.t. every parameter on the forward path (blocks up
/// to the deepest selected exit, selected exits); used by local training.
struct ObjectiveGrads {
  double loss = 0.0;
  ParamSet grads;
};
ObjectiveGrads objective_grads(const model::EENParams &mdl,
                               const AggregatedTeacher *teacher,
                               const model::Batch &batch,
                               const std::vector<int> &exit_set,
                               const model::ExitWeights &w, double lambda);

/// Probability mixture sum_i k_i softmax(head_i(backbone features)) — the
/// oracle the weight-averaged teacher is tested against.
Tensor mixture_teacher_probs(const std::map<int, model::Affine> &final_exits,
                             const std::vector<double> &k,
                             const std::vector<int> &client_ids,
                             const std::vector<model::Affine> &backbone,
                             const Tensor &x);

}  // namespace feexd::distill
