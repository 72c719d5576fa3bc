#include "feexd/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "feexd/ops.hpp"

namespace feexd {

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Node &Tape::at(Var v) {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw std::out_of_range("Tape: bad var id " + std::to_string(v.id));
  return nodes_[v.id];
}

const Tape::Node &Tape::at(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw std::out_of_range("Tape: bad var id " + std::to_string(v.id));
  return nodes_[v.id];
}

Var Tape::leaf(const Tensor &value, bool requires_grad) {
  Node n;
  n.op = Op::leaf;
  n.value = value;
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Var Tape::affine(Var x, Var w, Var b) {
  Node n;
  n.op = Op::affine;
  n.inputs = {x.id, w.id, b.id};
  n.value = affine_forward(at(x).value, at(w).value, at(b).value);
  n.requires_grad = at(x).requires_grad || at(w).requires_grad || at(b).requires_grad;
  return push(std::move(n));
}

Var Tape::relu(Var x) {
  Node n;
  n.op = Op::relu;
  n.inputs = {x.id};
  n.value = feexd::relu(at(x).value);
  n.requires_grad = at(x).requires_grad;
  return push(std::move(n));
}

Var Tape::softmax(Var logits) {
  Node n;
  n.op = Op::softmax;
  n.inputs = {logits.id};
  n.value = feexd::softmax(at(logits).value);
  n.requires_grad = at(logits).requires_grad;
  return push(std::move(n));
}

Var Tape::cross_entropy(Var probs, const std::vector<int> &labels) {
  Node n;
  n.op = Op::cross_entropy;
  n.inputs = {probs.id};
  n.value = Tensor::scalar(feexd::cross_entropy(at(probs).value, labels));
  n.requires_grad = at(probs).requires_grad;
  n.labels = labels;
  return push(std::move(n));
}

Var Tape::kl_divergence(Var p, Var q) {
  Node n;
  n.op = Op::kl_divergence;
  n.inputs = {p.id, q.id};
  n.value = Tensor::scalar(feexd::kl_divergence(at(p).value, at(q).value));
  n.requires_grad = at(p).requires_grad || at(q).requires_grad;
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  if (!at(a).value.same_shape(at(b).value))
    throw std::invalid_argument("Tape::add: shape mismatch");
  Node n;
  n.op = Op::add;
  n.inputs = {a.id, b.id};
  n.value = at(a).value;
  for (size_t i = 0; i < n.value.data.size(); ++i)
    n.value.data[i] += at(b).value.data[i];
  n.requires_grad = at(a).requires_grad || at(b).requires_grad;
  return push(std::move(n));
}

Var Tape::scale(Var a, double factor) {
  if (!std::isfinite(factor))
    throw std::invalid_argument("Tape::scale: non-finite factor");
  Node n;
  n.op = Op::scale;
  n.inputs = {a.id};
  n.value = at(a).value;
  for (double &v : n.value.data) v *= factor;
  n.requires_grad = at(a).requires_grad;
  n.factor = factor;
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::sum;
  n.inputs = {a.id};
  double acc = 0.0;
  for (double v : at(a).value.data) acc += v;
  n.value = Tensor::scalar(acc);
  n.requires_grad = at(a).requires_grad;
  return push(std::move(n));
}

const Tensor &Tape::value(Var v) const { return at(v).value; }

bool Tape::requires_grad(Var v) const { return at(v).requires_grad; }

const Tensor &Tape::grad(Var v) const {
  const Node &n = at(v);
  if (!n.has_grad)
    throw std::logic_error("Tape::grad: no gradient recorded for var " +
                           std::to_string(v.id));
  return n.grad;
}

void Tape::accumulate(int id, const Tensor &g) {
  Node &n = nodes_[id];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape);
    n.has_grad = true;
  }
  for (size_t i = 0; i < n.grad.data.size(); ++i) n.grad.data[i] += g.data[i];
}

void Tape::backward(Var root) {
  Node &r = at(root);
  if (r.value.size() != 1)
    throw std::invalid_argument("Tape::backward: root must be scalar");
  if (!r.requires_grad)
    throw std::invalid_argument("Tape::backward: root does not require grad");
  for (Node &n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  r.grad = Tensor::scalar(1.0);
  r.has_grad = true;
  for (int i = root.id; i >= 0; --i) {
    const Node &n = nodes_[i];
    if (!n.requires_grad || !n.has_grad || n.op == Op::leaf) continue;
    backward_into(n);
  }
}

void Tape::backward_into(const Node &node) {
  const Tensor &gy = node.grad;
  switch (node.op) {
    case Op::leaf:
      break;
    case Op::affine: {
      const Node &xn = nodes_[node.inputs[0]];
      const Node &wn = nodes_[node.inputs[1]];
      const Node &bn = nodes_[node.inputs[2]];
      const int n = xn.value.rows(), d_in = xn.value.cols(),
                d_out = wn.value.cols();
      if (xn.requires_grad) {
        Tensor gx({n, d_in});
        detail::matmul_nt(gy.data.data(), wn.value.data.data(), gx.data.data(),
                          n, d_out, d_in);
        accumulate(node.inputs[0], gx);
      }
      if (wn.requires_grad) {
        Tensor gw({d_in, d_out});
        detail::matmul_tn(xn.value.data.data(), gy.data.data(), gw.data.data(),
                          n, d_in, d_out);
        accumulate(node.inputs[1], gw);
      }
      if (bn.requires_grad) {
        Tensor gb({d_out});
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < d_out; ++j) gb.data[j] += gy.data[i * d_out + j];
        accumulate(node.inputs[2], gb);
      }
      break;
    }
    case Op::relu: {
      const Node &xn = nodes_[node.inputs[0]];
      Tensor gx(xn.value.shape);
      for (size_t i = 0; i < gx.data.size(); ++i)
        gx.data[i] = xn.value.data[i] > 0.0 ? gy.data[i] : 0.0;
      accumulate(node.inputs[0], gx);
      break;
    }
    case Op::softmax: {
      const Tensor &p = node.value;
      const int n = p.rows(), c = p.cols();
      Tensor gx({n, c});
      for (int i = 0; i < n; ++i) {
        double dot = 0.0;
        for (int j = 0; j < c; ++j) dot += gy.data[i * c + j] * p.data[i * c + j];
        for (int j = 0; j < c; ++j)
          gx.data[i * c + j] = p.data[i * c + j] * (gy.data[i * c + j] - dot);
      }
      accumulate(node.inputs[0], gx);
      break;
    }
    case Op::cross_entropy: {
      const Node &pn = nodes_[node.inputs[0]];
      const Tensor &probs = pn.value;
      const int n = probs.rows(), c = probs.cols();
      const double g = gy.data[0];
      Tensor gp({n, c});
      for (int i = 0; i < n; ++i) {
        const int y = node.labels[i];
        const double pv = probs.at(i, y);
        if (pv > kProbFloor) gp.data[i * c + y] = -g / (pv * n);
      }
      accumulate(node.inputs[0], gp);
      break;
    }
    case Op::kl_divergence: {
      const Node &pn = nodes_[node.inputs[0]];
      const Node &qn = nodes_[node.inputs[1]];
      const Tensor &p = pn.value;
      const Tensor &q = qn.value;
      const int n = p.rows(), c = p.cols();
      const double g = gy.data[0];
      if (pn.requires_grad) {
        Tensor gp({n, c});
        for (int i = 0; i < n * c; ++i) {
          const double pv = p.data[i];
          if (pv <= kProbFloor) continue;
          gp.data[i] =
              g * (std::log(pv / std::max(q.data[i], kProbFloor)) + 1.0) / n;
        }
        accumulate(node.inputs[0], gp);
      }
      if (qn.requires_grad) {
        Tensor gq({n, c});
        for (int i = 0; i < n * c; ++i) {
          const double pv = p.data[i];
          if (pv <= kProbFloor) continue;
          gq.data[i] = -g * pv / std::max(q.data[i], kProbFloor) / n;
        }
        accumulate(node.inputs[1], gq);
      }
      break;
    }
    case Op::add: {
      accumulate(node.inputs[0], gy);
      accumulate(node.inputs[1], gy);
      break;
    }
    case Op::scale: {
      Tensor gx = gy;
      for (double &v : gx.data) v *= node.factor;
      accumulate(node.inputs[0], gx);
      break;
    }
    case Op::sum: {
      const Node &xn = nodes_[node.inputs[0]];
      Tensor gx(xn.value.shape);
      const double g = gy.data[0];
      for (double &v : gx.data) v = g;
      accumulate(node.inputs[0], gx);
      break;
    }
  }
}

}  // namespace feexd
