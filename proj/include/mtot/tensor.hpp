#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace mtot {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMajorMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matrixd = MatrixX<double>;
using Vectord = VectorX<double>;

/// Thrown when tensor or matrix extents do not conform.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown for infeasible configurations (ranks, sizes, flags).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical routine fails (SVD non-convergence, non-finite data).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t k = 0; k < shape.size(); ++k) os << (k ? "," : "") << shape[k];
  os << ']';
  return os.str();
}

/// Dense N-mode array. Values are stored lexicographically with the last
/// mode index varying fastest. Modes are addressed 0-based.
template <typename Scalar = double>
class Tensor {
 public:
  using scalar_type = Scalar;

  Tensor() : shape_{1}, values_(VectorX<Scalar>::Zero(1)) {}

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    values_ = VectorX<Scalar>::Zero(shape_size(shape_));
  }

  Tensor(Shape shape, VectorX<Scalar> values) : shape_(std::move(shape)), values_(std::move(values)) {
    check_shape(shape_);
    if (values_.size() != shape_size(shape_))
      throw ShapeError("tensor value count " + std::to_string(values_.size()) +
                       " does not match shape " + shape_string(shape_));
  }

  Tensor(Shape shape, std::initializer_list<Scalar> values)
      : Tensor(std::move(shape), Eigen::Map<const VectorX<Scalar>>(values.begin(),
                                                                   static_cast<Index>(values.size()))) {}

  static Tensor Zero(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor Constant(Shape shape, Scalar value) {
    Tensor t(std::move(shape));
    t.values_.setConstant(value);
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index order() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return values_.size(); }
  Index extent(Index mode) const { return shape_.at(static_cast<std::size_t>(mode)); }

  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }
  VectorX<Scalar>& values() { return values_; }
  const VectorX<Scalar>& values() const { return values_; }

  Index offset(std::span<const Index> index) const {
    if (static_cast<Index>(index.size()) != order()) throw ShapeError("index arity does not match tensor order");
    Index off = 0;
    for (std::size_t k = 0; k < shape_.size(); ++k) {
      if (index[k] < 0 || index[k] >= shape_[k]) throw ShapeError("tensor index out of range");
      off = off * shape_[k] + index[k];
    }
    return off;
  }

  Scalar& operator()(std::initializer_list<Index> index) {
    return values_[offset(std::span<const Index>(index.begin(), index.size()))];
  }
  Scalar operator()(std::initializer_list<Index> index) const {
    return values_[offset(std::span<const Index>(index.begin(), index.size()))];
  }
  Scalar& at(std::span<const Index> index) { return values_[offset(index)]; }
  Scalar at(std::span<const Index> index) const { return values_[offset(index)]; }

  /// Same values, new extents. Product of extents must be unchanged.
  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), values_); }

  Tensor& operator+=(const Tensor& other) {
    require_same_shape(other);
    values_ += other.values_;
    return *this;
  }
  Tensor& operator-=(const Tensor& other) {
    require_same_shape(other);
    values_ -= other.values_;
    return *this;
  }
  Tensor& operator*=(Scalar s) {
    values_ *= s;
    return *this;
  }

  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
  friend Tensor operator*(Tensor a, Scalar s) { return a *= s; }
  friend Tensor operator*(Scalar s, Tensor a) { return a *= s; }

  bool operator==(const Tensor& other) const { return shape_ == other.shape_ && values_ == other.values_; }

  bool all_finite() const { return values_.allFinite(); }

 private:
  static void check_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor order must be at least 1");
    for (Index e : shape)
      if (e < 1) throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
  }
  void require_same_shape(const Tensor& other) const {
    if (shape_ != other.shape_)
      throw ShapeError("shape mismatch " + shape_string(shape_) + " vs " + shape_string(other.shape_));
  }

  Shape shape_;
  VectorX<Scalar> values_;
};

using Tensord = Tensor<double>;

/// Drops the leading (sample) mode of a shape.
inline Shape trailing_shape(const Shape& shape) {
  if (shape.size() < 2) throw ShapeError("expected a tensor with a sample mode and at least one more mode");
  return Shape(shape.begin() + 1, shape.end());
}

}  // namespace mtot
