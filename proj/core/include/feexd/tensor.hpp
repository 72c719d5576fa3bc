#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace feexd {

/// Dense row-major float64 tensor. Construction rejects non-finite entries
/// and shape/data length mismatches.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);  // zero-filled
  Tensor(std::vector<int> s, std::vector<double> d);

  static Tensor scalar(double v);
  static Tensor vec(std::vector<double> d);          // shape {n}
  static Tensor matrix(int rows, int cols, std::vector<double> d);

  std::int64_t size() const;
  int ndim() const { return static_cast<int>(shape.size()); }
  int rows() const;  // first dim of a 2-d tensor
  int cols() const;  // second dim of a 2-d tensor

  double &at(int r, int c);
  double at(int r, int c) const;

  bool same_shape(const Tensor &other) const { return shape == other.shape; }
  bool all_finite() const;

  /// Extracts row r of a 2-d tensor as a 1 x cols tensor.
  Tensor row(int r) const;
};

std::int64_t shape_size(const std::vector<int> &shape);
std::string shape_to_string(const std::vector<int> &shape);

/// Ordered, uniquely named collection of tensors. Iteration order is the
/// insertion order, which all serialization and optimizer code relies on.
struct ParamSet {
  std::vector<std::pair<std::string, Tensor>> items;

  Tensor &add(const std::string &name, Tensor t);
  const Tensor *find(std::string_view name) const;
  Tensor *find(std::string_view name);
  const Tensor &at(std::string_view name) const;
  Tensor &at(std::string_view name);
  bool contains(std::string_view name) const { return find(name) != nullptr; }

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  std::int64_t num_values() const;

  auto begin() { return items.begin(); }
  auto end() { return items.end(); }
  auto begin() const { return items.begin(); }
  auto end() const { return items.end(); }
};

/// Same names and shapes, all values zero.
ParamSet zeros_like(const ParamSet &ps);

/// dst += a * src, matched by name. Throws if names or shapes differ.
void add_scaled(ParamSet &dst, const ParamSet &src, double a);

}  // namespace feexd
