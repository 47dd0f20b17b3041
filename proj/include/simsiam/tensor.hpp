#ifndef SIMSIAM_TENSOR_HPP
#define SIMSIAM_TENSOR_HPP

#include <cstring>
#include <initializer_list>
#include <utility>

#include "simsiam/fwd.hpp"

namespace simsiam {

// Dense n-d value: a shape plus a flat row-major buffer. Value semantics;
// 2-d tensors view as batch-by-feature matrices via mat().
template <typename Scalar>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), data_(ArrayX<Scalar>::Zero(shape_numel(shape_))) {}

  Tensor(Shape shape, ArrayX<Scalar> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size())
      throw ShapeError("Tensor: shape " + shape_str(shape_) + " does not match buffer of " +
                       std::to_string(data_.size()) + " entries");
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor constant(Shape shape, Scalar v) {
    Tensor t(std::move(shape));
    t.data_.setConstant(v);
    return t;
  }

  static Tensor ones(Shape shape) { return constant(std::move(shape), Scalar(1)); }

  static Tensor scalar(Scalar v) { return constant({1}, v); }

  static Tensor row(std::initializer_list<Scalar> values) {
    Tensor t({static_cast<Index>(values.size())});
    Index i = 0;
    for (Scalar v : values) t.data_[i++] = v;
    return t;
  }

  static Tensor from_rows(std::initializer_list<std::initializer_list<Scalar>> rows) {
    const Index r = static_cast<Index>(rows.size());
    const Index c = r ? static_cast<Index>(rows.begin()->size()) : 0;
    Tensor t({r, c});
    Index i = 0;
    for (const auto& row : rows)
      for (Scalar v : row) t.data_[i++] = v;
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index numel() const { return data_.size(); }
  Index dim(Index i) const { return shape_[static_cast<std::size_t>(i)]; }

  ArrayX<Scalar>& flat() { return data_; }
  const ArrayX<Scalar>& flat() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar value() const {
    if (numel() != 1) throw ShapeError("Tensor::value: not a scalar, shape " + shape_str(shape_));
    return data_[0];
  }

  // 2-d matrix view (rows x cols, row-major).
  Index rows() const { return require_rank2("rows"), shape_[0]; }
  Index cols() const { return require_rank2("cols"), shape_[1]; }
  MatMap<Scalar> mat() {
    require_rank2("mat");
    return MatMap<Scalar>(data_.data(), shape_[0], shape_[1]);
  }
  ConstMatMap<Scalar> mat() const {
    require_rank2("mat");
    return ConstMatMap<Scalar>(data_.data(), shape_[0], shape_[1]);
  }

  // 2-d array view for elementwise work.
  ArrMap<Scalar> arr() {
    require_rank2("arr");
    return ArrMap<Scalar>(data_.data(), shape_[0], shape_[1]);
  }
  ConstArrMap<Scalar> arr() const {
    require_rank2("arr");
    return ConstArrMap<Scalar>(data_.data(), shape_[0], shape_[1]);
  }

  // Arbitrary 2-d view of the flat buffer (r*c must equal numel()).
  MatMap<Scalar> view2d(Index r, Index c) {
    if (r * c != numel())
      throw ShapeError("Tensor::view2d: " + std::to_string(r) + "x" + std::to_string(c) +
                       " does not cover " + std::to_string(numel()) + " entries");
    return MatMap<Scalar>(data_.data(), r, c);
  }
  ConstMatMap<Scalar> view2d(Index r, Index c) const {
    if (r * c != numel())
      throw ShapeError("Tensor::view2d: " + std::to_string(r) + "x" + std::to_string(c) +
                       " does not cover " + std::to_string(numel()) + " entries");
    return ConstMatMap<Scalar>(data_.data(), r, c);
  }

  Tensor reshaped(Shape shape) const {
    if (shape_numel(shape) != numel())
      throw ShapeError("Tensor::reshaped: " + shape_str(shape) + " does not match " +
                       std::to_string(numel()) + " entries");
    return Tensor(std::move(shape), data_);
  }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  bool all_finite() const { return data_.isFinite().all(); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

 private:
  void require_rank2(const char* who) const {
    if (rank() != 2)
      throw ShapeError(std::string("Tensor::") + who + ": rank-2 required, shape " +
                       shape_str(shape_));
  }

  Shape shape_;
  ArrayX<Scalar> data_;
};

template <typename Scalar>
bool bitwise_equal(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return a.shape() == b.shape() &&
         (a.numel() == 0 ||
          std::memcmp(a.data(), b.data(), sizeof(Scalar) * static_cast<std::size_t>(a.numel())) == 0);
}

template <typename Scalar>
Scalar max_abs_diff(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape())
    throw ShapeError("max_abs_diff: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  if (a.numel() == 0) return Scalar(0);
  return (a.flat() - b.flat()).abs().maxCoeff();
}

}  // namespace simsiam

#endif  // SIMSIAM_TENSOR_HPP
