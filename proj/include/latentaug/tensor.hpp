#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "latentaug/error.hpp"

namespace latentaug {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename Scalar>
class TapeT;

// Dense n-dimensional array in row-major order backed by an Eigen array.
// Tensors have value semantics: operations allocate fresh tensors and never
// mutate their inputs. Every dimension is positive; a rank-0 tensor is a
// scalar. All stored values are finite; constructors and operations enforce
// this so downstream code never sees NaN/Inf.
template <typename Scalar>
class TensorT {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMajorMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMajorMatrix>;

  TensorT() : shape_{}, data_(1) { data_[0] = Scalar(0); }

  TensorT(Shape shape, Array data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (numel(shape_) != data_.size()) {
      throw DimensionError("tensor: shape " + shape_str(shape_) + " does not match data length " +
                           std::to_string(data_.size()));
    }
    check_finite();
  }

  static TensorT zeros(Shape shape) {
    validate_shape(shape);
    Array a = Array::Zero(numel(shape));
    return TensorT(std::move(shape), std::move(a));
  }

  static TensorT ones(Shape shape) { return full(std::move(shape), Scalar(1)); }

  static TensorT full(Shape shape, Scalar v) {
    validate_shape(shape);
    Array a = Array::Constant(numel(shape), v);
    return TensorT(std::move(shape), std::move(a));
  }

  static TensorT scalar(Scalar v) { return full(Shape{}, v); }

  static TensorT from_vector(Shape shape, const std::vector<Scalar>& values) {
    Array a(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) a[static_cast<Eigen::Index>(i)] = values[i];
    return TensorT(std::move(shape), std::move(a));
  }

  const Shape& shape() const { return shape_; }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t size() const { return data_.size(); }
  std::int64_t dim(std::int64_t axis) const { return shape_.at(static_cast<std::size_t>(axis)); }

  bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

  const Array& array() const { return data_; }

  // Extracts the single element of a scalar (size-1) tensor.
  Scalar value() const {
    if (data_.size() != 1) {
      throw ContractError("value(): tensor of shape " + shape_str(shape_) + " is not scalar");
    }
    return data_[0];
  }

  Scalar operator[](std::int64_t flat) const { return data_[static_cast<Eigen::Index>(flat)]; }

  Scalar at(std::int64_t r, std::int64_t c) const {
    if (rank() != 2) throw DimensionError("at(r,c): tensor is not rank 2");
    return data_[static_cast<Eigen::Index>(r * shape_[1] + c)];
  }

  // Rank-2 view as a row-major matrix.
  ConstMatrixMap mat() const {
    if (rank() != 2) throw DimensionError("mat(): tensor of shape " + shape_str(shape_) + " is not rank 2");
    return ConstMatrixMap(data_.data(), shape_[0], shape_[1]);
  }

  // View as (rows = size/last_dim, cols = last_dim); used for bias broadcasts.
  ConstMatrixMap last_axis_view() const {
    if (rank() < 1) throw DimensionError("last_axis_view(): tensor is rank 0");
    const std::int64_t last = shape_.back();
    return ConstMatrixMap(data_.data(), size() / last, last);
  }

  // Same data, new shape (element count must match). Does not record on tape;
  // autodiff-aware reshape lives with the other ops.
  TensorT reshaped(Shape shape) const {
    validate_shape(shape);
    if (numel(shape) != size()) {
      throw DimensionError("reshape: cannot view " + shape_str(shape_) + " as " + shape_str(shape));
    }
    return TensorT(std::move(shape), data_);
  }

  bool grad_tracked() const { return grad_tracked_; }
  TensorT& set_grad_tracked(bool tracked) {
    grad_tracked_ = tracked;
    return *this;
  }

  // Replaces the stored values in place (used by optimizers). Shape must match.
  void assign(const Array& values) {
    if (values.size() != data_.size()) {
      throw DimensionError("assign: value count " + std::to_string(values.size()) +
                           " does not match tensor of shape " + shape_str(shape_));
    }
    data_ = values;
    check_finite();
    tape_id_ = 0;
    node_ = -1;
  }

 private:
  static void validate_shape(const Shape& shape) {
    for (auto d : shape) {
      if (d <= 0) throw DimensionError("tensor: non-positive dimension in shape " + shape_str(shape));
    }
  }

  void check_finite() const {
    if (!data_.allFinite()) {
      throw DomainError("tensor: operation produced a non-finite value");
    }
  }

  Shape shape_;
  Array data_;
  bool grad_tracked_ = false;

  // Tape bookkeeping: which tape (by id) this tensor is registered on, and at
  // which node. Mutable so recording does not break value semantics.
  mutable std::uint64_t tape_id_ = 0;
  mutable std::int64_t node_ = -1;

  friend class TapeT<Scalar>;
};

using Tensor = TensorT<double>;

}  // namespace latentaug
