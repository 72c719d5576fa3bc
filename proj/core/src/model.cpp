#include "feexd/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "feexd/ops.hpp"
#include "feexd/rng.hpp"

namespace feexd::model {

void ArchSpec::validate() const {
  if (m() < 2)
    throw std::invalid_argument("ArchSpec: need at least 2 blocks/exits");
  if (input_dim <= 0)
    throw std::invalid_argument("ArchSpec: input_dim must be positive");
  if (num_classes < 2)
    throw std::invalid_argument("ArchSpec: need at least 2 classes");
  for (int d : hidden_dims)
    if (d <= 0) throw std::invalid_argument("ArchSpec: hidden dims must be positive");
}

void check_exit_set(const std::vector<int> &exit_set, int m) {
  if (exit_set.empty()) throw std::invalid_argument("exit set must be nonempty");
  int prev = 0;
  for (int j : exit_set) {
    if (j < 1 || j > m)
      throw std::out_of_range("exit index " + std::to_string(j) +
                              " outside [1," + std::to_string(m) + "]");
    if (j <= prev)
      throw std::invalid_argument("exit set must be sorted and unique");
    prev = j;
  }
}

namespace {

Affine init_affine(std::mt19937_64 &eng, int d_in, int d_out) {
  Affine a;
  a.W = Tensor({d_in, d_out});
  const double bound = std::sqrt(6.0 / (d_in + d_out));
  for (double &v : a.W.data) v = (2.0 * next_double01(eng) - 1.0) * bound;
  a.b = Tensor({d_out});
  return a;
}

}  // namespace

EENParams init_model(const ArchSpec &spec, uint64_t seed) {
  spec.validate();
  EENParams mdl;
  mdl.arch = spec;
  std::mt19937_64 eng(seed);
  int d_prev = spec.input_dim;
  for (int d : spec.hidden_dims) {
    mdl.blocks.push_back(init_affine(eng, d_prev, d));
    d_prev = d;
  }
  for (int d : spec.hidden_dims)
    mdl.exits.push_back(init_affine(eng, d, spec.num_classes));
  return mdl;
}

Tensor forward_features(const EENParams &model, const Tensor &x, int j) {
  if (j < 1 || j > model.arch.m())
    throw std::out_of_range("forward_features: block index out of range");
  Tensor a = x;
  for (int b = 0; b < j; ++b)
    a = relu(affine_forward(a, model.blocks[b].W, model.blocks[b].b));
  return a;
}

Tensor forward_to_exit(const EENParams &model, const Tensor &x, int j) {
  const Tensor feats = forward_features(model, x, j);
  return softmax(affine_forward(feats, model.exits[j - 1].W, model.exits[j - 1].b));
}

std::vector<Tensor> forward_all_exits(const EENParams &model, const Tensor &x) {
  const int m = model.arch.m();
  std::vector<Tensor> probs;
  probs.reserve(m);
  Tensor a = x;
  for (int j = 1; j <= m; ++j) {
    a = relu(affine_forward(a, model.blocks[j - 1].W, model.blocks[j - 1].b));
    probs.push_back(
        softmax(affine_forward(a, model.exits[j - 1].W, model.exits[j - 1].b)));
  }
  return probs;
}

ExitWeights make_exit_weights(int m, const std::vector<int> &exit_set,
                              bool renormalize) {
  check_exit_set(exit_set, m);
  ExitWeights ew;
  ew.w.assign(m, 0.0);
  const double v =
      renormalize ? 1.0 / static_cast<double>(exit_set.size()) : 1.0 / m;
  for (int j : exit_set) ew.w[j - 1] = v;
  return ew;
}

double joint_loss(const EENParams &model, const Batch &batch,
                  const std::vector<int> &exit_set, const ExitWeights &w) {
  const int m = model.arch.m();
  check_exit_set(exit_set, m);
  if (w.w.size() != static_cast<size_t>(m))
    throw std::invalid_argument("joint_loss: weight vector size != m");
  double loss = 0.0;
  Tensor a = batch.x;
  int depth = 0;
  for (int j : exit_set) {
    while (depth < j) {
      a = relu(affine_forward(a, model.blocks[depth].W, model.blocks[depth].b));
      ++depth;
    }
    const Tensor probs =
        softmax(affine_forward(a, model.exits[j - 1].W, model.exits[j - 1].b));
    loss += w.w[j - 1] * cross_entropy(probs, batch.y);
  }
  return loss;
}

std::vector<double> flatten_head(const Tensor &W, const Tensor &b) {
  std::vector<double> v;
  v.reserve(W.size() + b.size());
  v.insert(v.end(), W.data.begin(), W.data.end());
  v.insert(v.end(), b.data.begin(), b.data.end());
  return v;
}

std::vector<double> flatten_exit(const EENParams &model, int j) {
  if (j < 1 || j > model.arch.m())
    throw std::out_of_range("flatten_exit: exit index out of range");
  return flatten_head(model.exits[j - 1].W, model.exits[j - 1].b);
}

ParamSet model_to_params(const EENParams &model) {
  ParamSet ps;
  for (size_t i = 0; i < model.blocks.size(); ++i) {
    const std::string base = "block" + std::to_string(i + 1);
    ps.add(base + ".W", model.blocks[i].W);
    ps.add(base + ".b", model.blocks[i].b);
  }
  for (size_t i = 0; i < model.exits.size(); ++i) {
    const std::string base = "exit" + std::to_string(i + 1);
    ps.add(base + ".W", model.exits[i].W);
    ps.add(base + ".b", model.exits[i].b);
  }
  return ps;
}

EENParams params_to_model(const ArchSpec &spec, const ParamSet &ps) {
  spec.validate();
  EENParams mdl;
  mdl.arch = spec;
  for (int i = 1; i <= spec.m(); ++i) {
    const std::string base = "block" + std::to_string(i);
    mdl.blocks.push_back({ps.at(base + ".W"), ps.at(base + ".b")});
  }
  for (int i = 1; i <= spec.m(); ++i) {
    const std::string base = "exit" + std::to_string(i);
    mdl.exits.push_back({ps.at(base + ".W"), ps.at(base + ".b")});
  }
  int d_prev = spec.input_dim;
  for (int i = 0; i < spec.m(); ++i) {
    const int d = spec.hidden_dims[i];
    if (mdl.blocks[i].W.rows() != d_prev || mdl.blocks[i].W.cols() != d ||
        mdl.exits[i].W.rows() != d || mdl.exits[i].W.cols() != spec.num_classes)
      throw std::invalid_argument("params_to_model: tensor shapes do not match spec");
    d_prev = d;
  }
  return mdl;
}

}  // namespace feexd::model
