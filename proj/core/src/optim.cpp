#include "feexd/optim.hpp"

#include <stdexcept>
#include <string>

namespace feexd {

void sgd_step(ParamSet &params, const ParamSet &grads, OptimizerState &state) {
  if (!(state.learning_rate > 0.0))
    throw std::invalid_argument("sgd_step: learning_rate must be > 0");
  if (state.velocity.empty()) state.velocity = zeros_like(params);
  for (auto &[name, p] : params.items) {
    const Tensor *g = grads.find(name);
    if (!g) continue;
    if (!g->same_shape(p))
      throw std::invalid_argument("sgd_step: grad shape mismatch for " + name);
    Tensor &v = state.velocity.at(name);
    for (size_t i = 0; i < p.data.size(); ++i) {
      v.data[i] = state.momentum * v.data[i] + g->data[i] +
                  state.weight_decay * p.data[i];
      p.data[i] -= state.learning_rate * v.data[i];
    }
  }
}

}  // namespace feexd
