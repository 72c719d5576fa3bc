#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>
#include <stdexcept>

#include "feexd/tensor.hpp"

using feexd::ParamSet;
using feexd::Tensor;

TEST_CASE("construction and shape checks") {
  Tensor z({2, 3});
  CHECK(z.size() == 6);
  CHECK(z.rows() == 2);
  CHECK(z.cols() == 3);
  for (double v : z.data) CHECK(v == 0.0);

  Tensor t = Tensor::matrix(2, 2, {1, 2, 3, 4});
  CHECK(t.at(0, 1) == 2);
  CHECK(t.at(1, 0) == 3);
  t.at(1, 1) = 9;
  CHECK(t.data[3] == 9);

  CHECK(Tensor::scalar(5.0).size() == 1);
  CHECK(Tensor::vec({1, 2, 3}).shape == std::vector<int>{3});
  CHECK(Tensor().size() == 0);

  CHECK_THROWS_AS(Tensor({0, 2}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({-1}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), std::invalid_argument);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(Tensor({2}, {1, nan}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({2}, {inf, 0}), std::invalid_argument);
}

TEST_CASE("row extraction and shape comparison") {
  Tensor t = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  Tensor r = t.row(1);
  CHECK(r.shape == std::vector<int>{1, 3});
  CHECK(r.data == std::vector<double>{4, 5, 6});
  CHECK(t.same_shape(Tensor({2, 3})));
  CHECK_FALSE(t.same_shape(Tensor({3, 2})));
  CHECK_THROWS_AS(Tensor::vec({1, 2}).rows(), std::invalid_argument);
}

TEST_CASE("param set keeps insertion order and unique names") {
  ParamSet ps;
  ps.add("b", Tensor::vec({1}));
  ps.add("a", Tensor::vec({2, 3}));
  CHECK(ps.size() == 2);
  CHECK(ps.num_values() == 3);
  CHECK(ps.items[0].first == "b");
  CHECK(ps.items[1].first == "a");
  CHECK(ps.contains("a"));
  CHECK_FALSE(ps.contains("c"));
  CHECK(ps.at("a").data == std::vector<double>{2, 3});
  CHECK(ps.find("missing") == nullptr);
  CHECK_THROWS_AS(ps.at("missing"), std::out_of_range);
  CHECK_THROWS_AS(ps.add("a", Tensor::vec({9})), std::invalid_argument);
}

TEST_CASE("zeros_like and add_scaled") {
  ParamSet ps;
  ps.add("w", Tensor::matrix(1, 2, {3, 4}));
  ParamSet z = feexd::zeros_like(ps);
  CHECK(z.at("w").data == std::vector<double>{0, 0});
  CHECK(z.at("w").same_shape(ps.at("w")));

  feexd::add_scaled(z, ps, 0.5);
  CHECK(z.at("w").data == std::vector<double>{1.5, 2});

  ParamSet other;
  other.add("v", Tensor::matrix(1, 2, {1, 1}));
  CHECK_THROWS_AS(feexd::add_scaled(z, other, 1.0), std::invalid_argument);
  ParamSet wrong;
  wrong.add("w", Tensor::vec({1, 1}));
  CHECK_THROWS_AS(feexd::add_scaled(z, wrong, 1.0), std::invalid_argument);
}
