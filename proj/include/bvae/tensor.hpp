#pragma once

#include <Eigen/Core>

#include <array>
#include <sstream>
#include <stdexcept>
#include <string>

namespace bvae {

using Index = Eigen::Index;

/// Thrown when an operation receives arrays whose dimensions disagree with its contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Shape4 {
  Index n = 0, c = 0, h = 0, w = 0;

  friend bool operator==(const Shape4&, const Shape4&) = default;

  std::string str() const {
    std::ostringstream os;
    os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
    return os.str();
  }
};

/// Dense NCHW activation batch. Sample i occupies the contiguous block
/// [i*c*h*w, (i+1)*c*h*w) with channel planes stored back to back, so one
/// sample maps onto a column-major (h*w) x c matrix.
template <typename Scalar>
class Tensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using Plane = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using SampleMap = Eigen::Map<Plane>;
  using ConstSampleMap = Eigen::Map<const Plane>;

  Tensor() = default;
  Tensor(Index n, Index c, Index h, Index w) : shape_{n, c, h, w}, data_(Array::Zero(n * c * h * w)) {}
  explicit Tensor(const Shape4& s) : Tensor(s.n, s.c, s.h, s.w) {}

  const Shape4& shape() const { return shape_; }
  Index n() const { return shape_.n; }
  Index c() const { return shape_.c; }
  Index h() const { return shape_.h; }
  Index w() const { return shape_.w; }
  Index plane_size() const { return shape_.h * shape_.w; }
  Index sample_size() const { return shape_.c * shape_.h * shape_.w; }
  Index size() const { return data_.size(); }

  Array& array() { return data_; }
  const Array& array() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  /// (h*w) x c view of one sample.
  SampleMap sample(Index i) { return SampleMap(data() + i * sample_size(), plane_size(), shape_.c); }
  ConstSampleMap sample(Index i) const {
    return ConstSampleMap(data() + i * sample_size(), plane_size(), shape_.c);
  }

  Scalar& at(Index i, Index ch, Index y, Index x) {
    return data_[((i * shape_.c + ch) * shape_.h + y) * shape_.w + x];
  }
  Scalar at(Index i, Index ch, Index y, Index x) const {
    return data_[((i * shape_.c + ch) * shape_.h + y) * shape_.w + x];
  }

  /// Copies sample i into a fresh single-sample tensor.
  Tensor slice(Index i) const {
    Tensor out(1, shape_.c, shape_.h, shape_.w);
    out.array() = data_.segment(i * sample_size(), sample_size());
    return out;
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_);
    out.array() = data_.template cast<Other>();
    return out;
  }

 private:
  Shape4 shape_;
  Array data_;
};

inline void require_shape(const Shape4& actual, const Shape4& expected, const char* what) {
  if (actual != expected) {
    throw ShapeError(std::string(what) + ": expected shape " + expected.str() + ", got " + actual.str());
  }
}

}  // namespace bvae
