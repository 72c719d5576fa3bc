#include "feexd/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace feexd {

std::int64_t shape_size(const std::vector<int> &shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_to_string(const std::vector<int> &shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

namespace {

void check_shape(const std::vector<int> &shape) {
  for (int d : shape) {
    if (d <= 0)
      throw std::invalid_argument("tensor shape must be positive, got " +
                                  shape_to_string(shape));
  }
}

}  // namespace

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  check_shape(shape);
  data.assign(static_cast<std::size_t>(shape_size(shape)), 0.0);
}

Tensor::Tensor(std::vector<int> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  check_shape(shape);
  if (shape_size(shape) != static_cast<std::int64_t>(data.size()))
    throw std::invalid_argument(
        "tensor data length " + std::to_string(data.size()) +
        " does not match shape " + shape_to_string(shape));
  if (!all_finite())
    throw std::invalid_argument("tensor contains NaN or Inf");
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::vec(std::vector<double> d) {
  const int n = static_cast<int>(d.size());
  return Tensor({n}, std::move(d));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> d) {
  return Tensor({rows, cols}, std::move(d));
}

std::int64_t Tensor::size() const { return static_cast<std::int64_t>(data.size()); }

int Tensor::rows() const {
  if (ndim() != 2) throw std::invalid_argument("rows(): tensor is not 2-d");
  return shape[0];
}

int Tensor::cols() const {
  if (ndim() != 2) throw std::invalid_argument("cols(): tensor is not 2-d");
  return shape[1];
}

double &Tensor::at(int r, int c) {
  return data[static_cast<std::size_t>(r) * cols() + c];
}

double Tensor::at(int r, int c) const {
  return data[static_cast<std::size_t>(r) * cols() + c];
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor Tensor::row(int r) const {
  const int c = cols();
  if (r < 0 || r >= rows()) throw std::out_of_range("row index out of range");
  std::vector<double> d(data.begin() + static_cast<std::size_t>(r) * c,
                        data.begin() + static_cast<std::size_t>(r + 1) * c);
  return Tensor({1, c}, std::move(d));
}

Tensor &ParamSet::add(const std::string &name, Tensor t) {
  if (contains(name))
    throw std::invalid_argument("duplicate parameter name: " + name);
  items.emplace_back(name, std::move(t));
  return items.back().second;
}

const Tensor *ParamSet::find(std::string_view name) const {
  for (const auto &[n, t] : items)
    if (n == name) return &t;
  return nullptr;
}

Tensor *ParamSet::find(std::string_view name) {
  for (auto &[n, t] : items)
    if (n == name) return &t;
  return nullptr;
}

const Tensor &ParamSet::at(std::string_view name) const {
  const Tensor *t = find(name);
  if (!t) throw std::out_of_range("no parameter named " + std::string(name));
  return *t;
}

Tensor &ParamSet::at(std::string_view name) {
  Tensor *t = find(name);
  if (!t) throw std::out_of_range("no parameter named " + std::string(name));
  return *t;
}

std::int64_t ParamSet::num_values() const {
  std::int64_t n = 0;
  for (const auto &[name, t] : items) n += t.size();
  return n;
}

ParamSet zeros_like(const ParamSet &ps) {
  ParamSet out;
  for (const auto &[name, t] : ps) out.add(name, Tensor(t.shape));
  return out;
}

void add_scaled(ParamSet &dst, const ParamSet &src, double a) {
  if (dst.size() != src.size())
    throw std::invalid_argument("add_scaled: parameter sets differ in size");
  for (std::size_t i = 0; i < dst.items.size(); ++i) {
    auto &[dn, dt] = dst.items[i];
    const auto &[sn, st] = src.items[i];
    if (dn != sn || !dt.same_shape(st))
      throw std::invalid_argument("add_scaled: mismatch at parameter " + dn);
    for (std::size_t k = 0; k < dt.data.size(); ++k) dt.data[k] += a * st.data[k];
  }
}

}  // namespace feexd
