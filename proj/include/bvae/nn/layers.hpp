#pragma once

#include "bvae/tensor.hpp"

#include <Eigen/Core>

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace bvae::nn {

/// train: batch statistics, running statistics updated.
/// eval: running statistics.
/// probe: batch statistics, running statistics left untouched.
enum class Mode { train, eval, probe };

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct Param {
  std::string name;
  Vector<Scalar> value;
  Vector<Scalar> grad;

  Param(std::string n, Index size) : name(std::move(n)), value(Vector<Scalar>::Zero(size)), grad(Vector<Scalar>::Zero(size)) {}
};

/// Non-trainable persistent state (batch-norm running statistics).
template <typename Scalar>
struct Buffer {
  std::string name;
  Vector<Scalar> value;
};

template <typename Scalar>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<Scalar> forward(Tensor<Scalar> x, Mode mode) = 0;
  /// Gradient w.r.t. the input of the most recent forward call. Parameter
  /// gradients are accumulated into Param::grad.
  virtual Tensor<Scalar> backward(const Tensor<Scalar>& dy) = 0;
  virtual std::vector<Param<Scalar>*> params() { return {}; }
  virtual std::vector<Buffer<Scalar>*> buffers() { return {}; }
  virtual std::string name() const = 0;
};

namespace detail {

/// Column-major (h*w) x (channels*9) patch matrix for a 3x3 window with
/// zero padding 1. Column ci*9 + ky*3 + kx holds channel ci shifted by
/// (ky-1, kx-1).
template <typename Scalar>
void im2col3x3(const Scalar* src, Index channels, Index h, Index w, Scalar* cols) {
  const Index hw = h * w;
  for (Index ci = 0; ci < channels; ++ci) {
    const Scalar* plane = src + ci * hw;
    for (Index k = 0; k < 9; ++k) {
      const Index dy = k / 3 - 1, dx = k % 3 - 1;
      Scalar* col = cols + (ci * 9 + k) * hw;
      for (Index y = 0; y < h; ++y) {
        const Index sy = y + dy;
        Scalar* row = col + y * w;
        if (sy < 0 || sy >= h) {
          std::fill(row, row + w, Scalar(0));
          continue;
        }
        const Scalar* srow = plane + sy * w;
        const Index x0 = std::max<Index>(0, -dx), x1 = std::min<Index>(w, w - dx);
        for (Index x = 0; x < x0; ++x) row[x] = Scalar(0);
        for (Index x = x0; x < x1; ++x) row[x] = srow[x + dx];
        for (Index x = x1; x < w; ++x) row[x] = Scalar(0);
      }
    }
  }
}

/// Adjoint of im2col3x3; accumulates into dst.
template <typename Scalar>
void col2im3x3(const Scalar* cols, Index channels, Index h, Index w, Scalar* dst) {
  const Index hw = h * w;
  for (Index ci = 0; ci < channels; ++ci) {
    Scalar* plane = dst + ci * hw;
    for (Index k = 0; k < 9; ++k) {
      const Index dy = k / 3 - 1, dx = k % 3 - 1;
      const Scalar* col = cols + (ci * 9 + k) * hw;
      for (Index y = 0; y < h; ++y) {
        const Index sy = y + dy;
        if (sy < 0 || sy >= h) continue;
        const Scalar* row = col + y * w;
        Scalar* drow = plane + sy * w;
        const Index x0 = std::max<Index>(0, -dx), x1 = std::min<Index>(w, w - dx);
        for (Index x = x0; x < x1; ++x) drow[x + dx] += row[x];
      }
    }
  }
}

template <typename Scalar, typename Rng>
void uniform_fill(Vector<Scalar>& v, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < v.size(); ++i) v[i] = static_cast<Scalar>(dist(rng));
}

}  // namespace detail

/// 3x3 convolution, stride 1, zero padding 1 (spatial size preserved).
template <typename Scalar>
class Conv2d final : public Layer<Scalar> {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  template <typename Rng>
  Conv2d(std::string name, Index in_channels, Index out_channels, bool bias, Rng& rng)
      : name_(std::move(name)),
        cin_(in_channels),
        cout_(out_channels),
        weight_(name_ + ".weight", in_channels * 9 * out_channels),
        bias_(name_ + ".bias", bias ? out_channels : 0) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * 9));
    detail::uniform_fill(weight_.value, bound, rng);
    detail::uniform_fill(bias_.value, bound, rng);
  }

  Tensor<Scalar> forward(Tensor<Scalar> x, Mode) override {
    if (x.c() != cin_) throw ShapeError(name_ + ": expected " + std::to_string(cin_) + " input channels, got " + std::to_string(x.c()));
    input_ = std::move(x);
    const Tensor<Scalar>& in = input_;
    Tensor<Scalar> y(in.n(), cout_, in.h(), in.w());
    Mat cols(in.plane_size(), cin_ * 9);
    const auto wt = weights();
    for (Index i = 0; i < in.n(); ++i) {
      detail::im2col3x3(in.data() + i * in.sample_size(), cin_, in.h(), in.w(), cols.data());
      auto out = y.sample(i);
      out.noalias() = cols * wt;
      if (bias_.value.size() > 0) out.rowwise() += bias_.value.transpose();
    }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) override {
    const Tensor<Scalar>& x = input_;
    Tensor<Scalar> dx(x.shape());
    Mat cols(x.plane_size(), cin_ * 9);
    Mat dcols(x.plane_size(), cin_ * 9);
    auto dwt = weight_grads();
    const auto wt = weights();
    for (Index i = 0; i < x.n(); ++i) {
      const auto g = dy.sample(i);
      detail::im2col3x3(x.data() + i * x.sample_size(), cin_, x.h(), x.w(), cols.data());
      dwt.noalias() += cols.transpose() * g;
      if (bias_.value.size() > 0) bias_.grad += g.colwise().sum().transpose();
      dcols.noalias() = g * wt.transpose();
      detail::col2im3x3(dcols.data(), cin_, x.h(), x.w(), dx.data() + i * x.sample_size());
    }
    return dx;
  }

  std::vector<Param<Scalar>*> params() override {
    if (bias_.value.size() > 0) return {&weight_, &bias_};
    return {&weight_};
  }
  std::string name() const override { return name_; }
  Index in_channels() const { return cin_; }
  Index out_channels() const { return cout_; }

 private:
  Eigen::Map<const Mat> weights() const { return {weight_.value.data(), cin_ * 9, cout_}; }
  Eigen::Map<Mat> weight_grads() { return {weight_.grad.data(), cin_ * 9, cout_}; }

  std::string name_;
  Index cin_, cout_;
  Param<Scalar> weight_, bias_;
  Tensor<Scalar> input_;
};

/// 3x3 transposed convolution, stride 1, padding 1 (spatial size preserved).
/// Its forward pass is the adjoint of Conv2d's input mapping.
template <typename Scalar>
class TransposedConv2d final : public Layer<Scalar> {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  template <typename Rng>
  TransposedConv2d(std::string name, Index in_channels, Index out_channels, bool bias, Rng& rng)
      : name_(std::move(name)),
        cin_(in_channels),
        cout_(out_channels),
        weight_(name_ + ".weight", in_channels * out_channels * 9),
        bias_(name_ + ".bias", bias ? out_channels : 0) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(out_channels * 9));
    detail::uniform_fill(weight_.value, bound, rng);
    detail::uniform_fill(bias_.value, bound, rng);
  }

  Tensor<Scalar> forward(Tensor<Scalar> x, Mode) override {
    if (x.c() != cin_) throw ShapeError(name_ + ": expected " + std::to_string(cin_) + " input channels, got " + std::to_string(x.c()));
    input_ = std::move(x);
    const Tensor<Scalar>& in = input_;
    Tensor<Scalar> y(in.n(), cout_, in.h(), in.w());
    Mat cols(in.plane_size(), cout_ * 9);
    const auto wm = weights();
    for (Index i = 0; i < in.n(); ++i) {
      cols.noalias() = in.sample(i) * wm;
      detail::col2im3x3(cols.data(), cout_, in.h(), in.w(), y.data() + i * y.sample_size());
      if (bias_.value.size() > 0) y.sample(i).rowwise() += bias_.value.transpose();
    }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) override {
    const Tensor<Scalar>& x = input_;
    Tensor<Scalar> dx(x.shape());
    Mat dcols(x.plane_size(), cout_ * 9);
    auto dwm = weight_grads();
    const auto wm = weights();
    for (Index i = 0; i < x.n(); ++i) {
      detail::im2col3x3(dy.data() + i * dy.sample_size(), cout_, x.h(), x.w(), dcols.data());
      dwm.noalias() += x.sample(i).transpose() * dcols;
      if (bias_.value.size() > 0) bias_.grad += dy.sample(i).colwise().sum().transpose();
      dx.sample(i).noalias() = dcols * wm.transpose();
    }
    return dx;
  }

  std::vector<Param<Scalar>*> params() override {
    if (bias_.value.size() > 0) return {&weight_, &bias_};
    return {&weight_};
  }
  std::string name() const override { return name_; }
  Index in_channels() const { return cin_; }
  Index out_channels() const { return cout_; }

 private:
  Eigen::Map<const Mat> weights() const { return {weight_.value.data(), cin_, cout_ * 9}; }
  Eigen::Map<Mat> weight_grads() { return {weight_.grad.data(), cin_, cout_ * 9}; }

  std::string name_;
  Index cin_, cout_;
  Param<Scalar> weight_, bias_;
  Tensor<Scalar> input_;
};

/// Per-channel batch normalization with learned affine parameters.
template <typename Scalar>
class BatchNorm2d final : public Layer<Scalar> {
 public:
  using Arr = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using PlaneMap = Eigen::Map<Arr>;
  using ConstPlaneMap = Eigen::Map<const Arr>;

  BatchNorm2d(std::string name, Index channels, double momentum = 0.1, double eps = 1e-5)
      : name_(std::move(name)),
        channels_(channels),
        momentum_(momentum),
        eps_(eps),
        gamma_(name_ + ".weight", channels),
        beta_(name_ + ".bias", channels),
        running_mean_{name_ + ".running_mean", Vector<Scalar>::Zero(channels)},
        running_var_{name_ + ".running_var", Vector<Scalar>::Ones(channels)} {
    gamma_.value.setOnes();
  }

  Tensor<Scalar> forward(Tensor<Scalar> x, Mode mode) override {
    if (x.c() != channels_) throw ShapeError(name_ + ": channel mismatch");
    mode_ = mode;
    const Index hw = x.plane_size();
    const Index count = x.n() * hw;
    Arr mean(channels_), var(channels_);
    if (mode == Mode::eval) {
      mean = running_mean_.value.array();
      var = running_var_.value.array();
    } else {
      // Two-pass moments; per-plane partial sums are combined in double.
      for (Index c = 0; c < channels_; ++c) {
        double sum = 0;
        for (Index i = 0; i < x.n(); ++i) sum += static_cast<double>(plane(x, i, c).sum());
        const double m = sum / static_cast<double>(count);
        double sq = 0;
        for (Index i = 0; i < x.n(); ++i) sq += static_cast<double>((plane(x, i, c) - Scalar(m)).square().sum());
        mean[c] = static_cast<Scalar>(m);
        var[c] = static_cast<Scalar>(sq / static_cast<double>(count));
      }
      if (mode == Mode::train) {
        const Scalar mom = Scalar(momentum_);
        const Scalar unbiased = count > 1 ? Scalar(count) / Scalar(count - 1) : Scalar(1);
        running_mean_.value.array() = (Scalar(1) - mom) * running_mean_.value.array() + mom * mean;
        running_var_.value.array() = (Scalar(1) - mom) * running_var_.value.array() + mom * unbiased * var;
      }
    }
    inv_std_ = (var + Scalar(eps_)).rsqrt();
    xhat_ = std::move(x);
    Tensor<Scalar> y(xhat_.shape());
    for (Index i = 0; i < xhat_.n(); ++i) {
      for (Index c = 0; c < channels_; ++c) {
        auto xh = plane(xhat_, i, c);
        xh = (xh - mean[c]) * inv_std_[c];
        plane(y, i, c) = xh * gamma_.value[c] + beta_.value[c];
      }
    }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) override {
    const Index count = dy.n() * dy.plane_size();
    Arr sum_dy = Arr::Zero(channels_), sum_dy_xhat = Arr::Zero(channels_);
    for (Index i = 0; i < dy.n(); ++i) {
      for (Index c = 0; c < channels_; ++c) {
        const auto g = plane(dy, i, c);
        sum_dy[c] += g.sum();
        sum_dy_xhat[c] += (g * plane(xhat_, i, c)).sum();
      }
    }
    gamma_.grad.array() += sum_dy_xhat;
    beta_.grad.array() += sum_dy;

    Tensor<Scalar> dx(dy.shape());
    const bool batch_stats = mode_ != Mode::eval;
    for (Index c = 0; c < channels_; ++c) {
      const Scalar scale = gamma_.value[c] * inv_std_[c];
      const Scalar mean_dy = sum_dy[c] / Scalar(count);
      const Scalar mean_dy_xhat = sum_dy_xhat[c] / Scalar(count);
      for (Index i = 0; i < dy.n(); ++i) {
        if (batch_stats) {
          plane(dx, i, c) = scale * (plane(dy, i, c) - mean_dy - plane(xhat_, i, c) * mean_dy_xhat);
        } else {
          plane(dx, i, c) = scale * plane(dy, i, c);
        }
      }
    }
    return dx;
  }

  std::vector<Param<Scalar>*> params() override { return {&gamma_, &beta_}; }
  std::vector<Buffer<Scalar>*> buffers() override { return {&running_mean_, &running_var_}; }
  std::string name() const override { return name_; }

 private:
  static PlaneMap plane(Tensor<Scalar>& t, Index i, Index c) {
    return PlaneMap(t.data() + (i * t.c() + c) * t.plane_size(), t.plane_size());
  }
  static ConstPlaneMap plane(const Tensor<Scalar>& t, Index i, Index c) {
    return ConstPlaneMap(t.data() + (i * t.c() + c) * t.plane_size(), t.plane_size());
  }

  std::string name_;
  Index channels_;
  double momentum_, eps_;
  Param<Scalar> gamma_, beta_;
  Buffer<Scalar> running_mean_, running_var_;
  Mode mode_ = Mode::train;
  Arr inv_std_;
  Tensor<Scalar> xhat_;
};

template <typename Scalar>
class LeakyReLU final : public Layer<Scalar> {
 public:
  LeakyReLU(std::string name, double slope) : name_(std::move(name)), slope_(static_cast<Scalar>(slope)) {}

  Tensor<Scalar> forward(Tensor<Scalar> x, Mode) override {
    Tensor<Scalar> y(x.shape());
    y.array() = x.array().max(slope_ * x.array());
    input_ = std::move(x);
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) override {
    Tensor<Scalar> dx(dy.shape());
    dx.array() = dy.array() * (slope_ + (Scalar(1) - slope_) * (input_.array() > Scalar(0)).template cast<Scalar>());
    return dx;
  }

  std::string name() const override { return name_; }

 private:
  std::string name_;
  Scalar slope_;
  Tensor<Scalar> input_;
};

template <typename Scalar>
class Tanh final : public Layer<Scalar> {
 public:
  explicit Tanh(std::string name) : name_(std::move(name)) {}

  Tensor<Scalar> forward(Tensor<Scalar> x, Mode) override {
    output_ = Tensor<Scalar>(x.shape());
    output_.array() = x.array().tanh();
    return output_;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) override {
    Tensor<Scalar> dx(dy.shape());
    dx.array() = dy.array() * (Scalar(1) - output_.array().square());
    return dx;
  }

  std::string name() const override { return name_; }

 private:
  std::string name_;
  Tensor<Scalar> output_;
};

/// 2x2 max pooling with stride 2.
template <typename Scalar>
class MaxPool2d final : public Layer<Scalar> {
 public:
  explicit MaxPool2d(std::string name) : name_(std::move(name)) {}

  Tensor<Scalar> forward(Tensor<Scalar> x, Mode) override {
    if (x.h() % 2 != 0 || x.w() % 2 != 0) throw ShapeError(name_ + ": spatial size must be even, got " + x.shape().str());
    in_shape_ = x.shape();
    Tensor<Scalar> y(x.n(), x.c(), x.h() / 2, x.w() / 2);
    argmax_.resize(y.size());
    const Index oh = y.h(), ow = y.w();
    for (Index p = 0; p < x.n() * x.c(); ++p) {
      const Scalar* src = x.data() + p * x.plane_size();
      Scalar* dst = y.data() + p * y.plane_size();
      Index* arg = argmax_.data() + p * y.plane_size();
      for (Index oy = 0; oy < oh; ++oy) {
        for (Index ox = 0; ox < ow; ++ox) {
          Index best = (2 * oy) * x.w() + 2 * ox;
          for (Index k = 1; k < 4; ++k) {
            const Index idx = (2 * oy + k / 2) * x.w() + 2 * ox + k % 2;
            if (src[idx] > src[best]) best = idx;
          }
          dst[oy * ow + ox] = src[best];
          arg[oy * ow + ox] = best;
        }
      }
    }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) override {
    Tensor<Scalar> dx(in_shape_);
    const Index in_plane = in_shape_.h * in_shape_.w;
    for (Index p = 0; p < dy.n() * dy.c(); ++p) {
      const Scalar* g = dy.data() + p * dy.plane_size();
      const Index* arg = argmax_.data() + p * dy.plane_size();
      Scalar* d = dx.data() + p * in_plane;
      for (Index j = 0; j < dy.plane_size(); ++j) d[arg[j]] += g[j];
    }
    return dx;
  }

  std::string name() const override { return name_; }

 private:
  std::string name_;
  Shape4 in_shape_;
  std::vector<Index> argmax_;
};

/// Keys' cubic convolution kernel with a = -0.75, half-pixel centres and
/// clamped borders. Row o of the returned (2n x n) matrix holds the weights
/// that produce output sample o.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> bicubic_upsample_matrix(Index n, Index scale = 2) {
  constexpr double a = -0.75;
  auto near = [](double t) { return ((a + 2) * t - (a + 3)) * t * t + 1; };
  auto far = [](double t) { return ((a * t - 5 * a) * t + 8 * a) * t - 4 * a; };
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> u = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(n * scale, n);
  for (Index o = 0; o < n * scale; ++o) {
    const double src = (o + 0.5) / static_cast<double>(scale) - 0.5;
    const double fl = std::floor(src);
    const double t = src - fl;
    const double w[4] = {far(t + 1), near(t), near(1 - t), far(2 - t)};
    for (int k = 0; k < 4; ++k) {
      const Index idx = std::clamp<Index>(static_cast<Index>(fl) - 1 + k, 0, n - 1);
      u(o, idx) += static_cast<Scalar>(w[k]);
    }
  }
  return u;
}

/// Separable bicubic upsampling by a factor of 2.
template <typename Scalar>
class UpsampleBicubic2d final : public Layer<Scalar> {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  explicit UpsampleBicubic2d(std::string name) : name_(std::move(name)) {}

  Tensor<Scalar> forward(Tensor<Scalar> x, Mode) override {
    in_shape_ = x.shape();
    prepare(x.h(), x.w());
    Tensor<Scalar> y(x.n(), x.c(), 2 * x.h(), 2 * x.w());
    for (Index p = 0; p < x.n() * x.c(); ++p) {
      // Planes are row-major in (y, x), i.e. column-major (w x h).
      Eigen::Map<const Mat> src(x.data() + p * x.plane_size(), x.w(), x.h());
      Eigen::Map<Mat> dst(y.data() + p * y.plane_size(), y.w(), y.h());
      dst.noalias() = uw_ * src * uh_.transpose();
    }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) override {
    Tensor<Scalar> dx(in_shape_);
    for (Index p = 0; p < dy.n() * dy.c(); ++p) {
      Eigen::Map<const Mat> g(dy.data() + p * dy.plane_size(), dy.w(), dy.h());
      Eigen::Map<Mat> d(dx.data() + p * dx.plane_size(), dx.w(), dx.h());
      d.noalias() = uw_.transpose() * g * uh_;
    }
    return dx;
  }

  std::string name() const override { return name_; }

 private:
  void prepare(Index h, Index w) {
    if (uh_.cols() != h) uh_ = bicubic_upsample_matrix<Scalar>(h);
    if (uw_.cols() != w) uw_ = bicubic_upsample_matrix<Scalar>(w);
  }

  std::string name_;
  Shape4 in_shape_;
  Mat uh_, uw_;
};

}  // namespace bvae::nn
