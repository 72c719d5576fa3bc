#pragma once

#include "feexd/tensor.hpp"

namespace feexd {

/// Momentum-SGD state: hyperparameters plus per-parameter velocity buffers.
/// velocity is shaped lazily from the first step; lr_decay is applied by the
/// caller once per round (learning_rate *= lr_decay), not inside sgd_step.
struct OptimizerState {
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double lr_decay = 0.99;
  ParamSet velocity;
};

/// v <- momentum*v + g + wd*p; p <- p - lr*v.
/// Parameters without a grads entry are left untouched (frozen this step).
void sgd_step(ParamSet &params, const ParamSet &grads, OptimizerState &state);

}  // namespace feexd
