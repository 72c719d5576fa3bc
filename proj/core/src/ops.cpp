#include "feexd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace feexd {

namespace detail {

void matmul(const double *a, const double *b, double *c, int n, int k, int m) {
  std::memset(c, 0, sizeof(double) * static_cast<size_t>(n) * m);
  for (int i = 0; i < n; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double *brow = b + p * m;
      double *crow = c + i * m;
      for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_nt(const double *a, const double *b, double *c, int n, int m, int k2) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k2; ++j) {
      double acc = 0.0;
      const double *arow = a + i * m;
      const double *brow = b + j * m;
      for (int p = 0; p < m; ++p) acc += arow[p] * brow[p];
      c[i * k2 + j] = acc;
    }
  }
}

void matmul_tn(const double *a, const double *b, double *c, int n, int k, int m) {
  std::memset(c, 0, sizeof(double) * static_cast<size_t>(k) * m);
  for (int i = 0; i < n; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double *brow = b + i * m;
      double *crow = c + p * m;
      for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace detail

Tensor affine_forward(const Tensor &x, const Tensor &w, const Tensor &b) {
  if (x.ndim() != 2 || w.ndim() != 2)
    throw std::invalid_argument("affine_forward: x and W must be rank 2");
  if (b.ndim() != 1)
    throw std::invalid_argument("affine_forward: b must be rank 1");
  const int n = x.rows(), d_in = x.cols();
  const int d_out = w.cols();
  if (w.rows() != d_in)
    throw std::invalid_argument("affine_forward: W rows (" +
                                std::to_string(w.rows()) +
                                ") != x cols (" + std::to_string(d_in) + ")");
  if (b.size() != static_cast<size_t>(d_out))
    throw std::invalid_argument("affine_forward: b size != W cols");
  Tensor y({n, d_out});
  detail::matmul(x.data.data(), w.data.data(), y.data.data(), n, d_in, d_out);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d_out; ++j) y.data[i * d_out + j] += b.data[j];
  return y;
}

Tensor relu(const Tensor &x) {
  Tensor y = x;
  for (double &v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor softmax(const Tensor &logits) {
  if (logits.ndim() != 2)
    throw std::invalid_argument("softmax: expected rank-2 logits");
  const int n = logits.rows(), c = logits.cols();
  Tensor p({n, c});
  for (int i = 0; i < n; ++i) {
    const double *row = logits.data.data() + i * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    double *out = p.data.data() + i * c;
    for (int j = 0; j < c; ++j) {
      out[j] = std::exp(row[j] - mx);
      denom += out[j];
    }
    for (int j = 0; j < c; ++j) out[j] /= denom;
  }
  return p;
}

double cross_entropy(const Tensor &probs, const std::vector<int> &labels) {
  if (probs.ndim() != 2)
    throw std::invalid_argument("cross_entropy: expected rank-2 probs");
  const int n = probs.rows(), c = probs.cols();
  if (labels.size() != static_cast<size_t>(n))
    throw std::invalid_argument("cross_entropy: labels size != batch size");
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= c)
      throw std::invalid_argument("cross_entropy: label " + std::to_string(y) +
                                  " out of range [0," + std::to_string(c) + ")");
    acc += -std::log(std::max(probs.at(i, y), kProbFloor));
  }
  return acc / n;
}

double kl_divergence(const Tensor &p, const Tensor &q) {
  if (!p.same_shape(q) || p.ndim() != 2)
    throw std::invalid_argument("kl_divergence: p and q must share a rank-2 shape");
  const int n = p.rows(), c = p.cols();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < c; ++j) {
      const double pv = p.at(i, j);
      if (pv <= kProbFloor) continue;
      acc += pv * std::log(pv / std::max(q.at(i, j), kProbFloor));
    }
  }
  return acc / n;
}

double cosine_similarity(const std::vector<double> &a,
                         const std::vector<double> &b) {
  if (a.size() != b.size())
    throw std::invalid_argument("cosine_similarity: size mismatch");
  if (a.empty()) throw std::invalid_argument("cosine_similarity: empty vectors");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0)
    throw std::invalid_argument("cosine_similarity: zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

}  // namespace feexd
