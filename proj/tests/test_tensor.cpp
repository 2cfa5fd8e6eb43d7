#include <doctest.h>

#include <cmath>
#include <limits>

#include "latentaug/tensor.hpp"

using namespace latentaug;

TEST_CASE("shape product must match data length") {
  CHECK_NOTHROW(Tensor::from_vector({2, 3}, {1, 2, 3, 4, 5, 6}));
  CHECK_THROWS_AS(Tensor::from_vector({2, 3}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor::from_vector({0}, {}), DimensionError);
  CHECK_THROWS_AS(Tensor::from_vector({2, -1}, {1, 2}), DimensionError);
}

TEST_CASE("scalars are rank 0 with a single value") {
  Tensor s = Tensor::scalar(3.5);
  CHECK(s.rank() == 0);
  CHECK(s.size() == 1);
  CHECK(s.value() == 3.5);
  Tensor v = Tensor::from_vector({2}, {1, 2});
  CHECK_THROWS_AS(v.value(), ContractError);
}

TEST_CASE("non-finite values are rejected") {
  CHECK_THROWS_AS(Tensor::from_vector({1}, {std::numeric_limits<double>::quiet_NaN()}), DomainError);
  CHECK_THROWS_AS(Tensor::from_vector({1}, {std::numeric_limits<double>::infinity()}), DomainError);
  Tensor t = Tensor::zeros({2});
  Tensor::Array bad(2);
  bad << 1.0, std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(t.assign(bad), DomainError);
}

TEST_CASE("reshaped preserves data and checks element count") {
  Tensor t = Tensor::from_vector({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor r = t.reshaped({3, 2});
  CHECK(r.at(2, 1) == 6.0);
  CHECK_THROWS_AS(t.reshaped({4, 2}), DimensionError);
}

TEST_CASE("row-major matrix view") {
  Tensor t = Tensor::from_vector({2, 2}, {1, 2, 3, 4});
  auto m = t.mat();
  CHECK(m(0, 1) == 2.0);
  CHECK(m(1, 0) == 3.0);
}

TEST_CASE("float instantiation works") {
  TensorT<float> t = TensorT<float>::from_vector({2}, {1.5f, -2.0f});
  CHECK(t.array().sum() == doctest::Approx(-0.5f));
}
