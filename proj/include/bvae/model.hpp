#pragma once

#include "bvae/nn/layers.hpp"
#include "bvae/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace bvae {

enum class ModelKind { beta_vae, vae, cae };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

/// Architecture description. Stage indices in pool_after / upsample_after
/// are 1-based and name the conv (resp. transposed-conv) stage the resampling
/// follows.
struct ModelSpec {
  ModelKind kind = ModelKind::beta_vae;
  int input_size = 64;
  int input_channels = 3;
  std::vector<int> encoder_filters{16, 32, 64, 128, 256};
  std::vector<int> pool_after{2, 3, 4};
  int bottleneck_channels = 10;
  std::vector<int> decoder_filters{256, 128, 64, 32, 16, 3};
  std::vector<int> upsample_after{2, 3, 4};
  double leaky_slope = 0.01;

  int bottleneck_size() const { return input_size >> pool_after.size(); }
  int latent_dim() const { return bottleneck_channels * bottleneck_size() * bottleneck_size(); }
  bool variational() const { return kind != ModelKind::cae; }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

template <typename Scalar>
using LatentMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Posterior parameters, one row per sample.
template <typename Scalar>
struct EncoderOutput {
  LatentMatrix<Scalar> mu;
  LatentMatrix<Scalar> log_var;
};

/// z = mu + exp(log_var / 2) * eps, element-wise.
template <typename Scalar>
LatentMatrix<Scalar> reparameterize(const EncoderOutput<Scalar>& enc, const LatentMatrix<Scalar>& eps) {
  if (eps.rows() != enc.mu.rows() || eps.cols() != enc.mu.cols()) {
    throw ShapeError("reparameterize: eps shape does not match mu");
  }
  return (enc.mu.array() + (enc.log_var.array() * Scalar(0.5)).exp() * eps.array()).matrix();
}

template <typename Scalar, typename Rng>
LatentMatrix<Scalar> standard_normal(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  LatentMatrix<Scalar> eps(rows, cols);
  for (Index i = 0; i < eps.size(); ++i) eps.data()[i] = static_cast<Scalar>(dist(rng));
  return eps;
}

template <typename Scalar>
struct ForwardResult {
  Tensor<Scalar> reconstruction;
  EncoderOutput<Scalar> encoding;
  LatentMatrix<Scalar> z;
};

/// Parameters of one decoder module, the unit over which gradient cosines are taken.
template <typename Scalar>
struct LayerParams {
  std::string name;
  std::vector<nn::Param<Scalar>*> params;

  Index size() const {
    Index n = 0;
    for (const auto* p : params) n += p->value.size();
    return n;
  }
};

/// Convolutional encoder/decoder with either a Gaussian posterior head pair
/// (vae, beta_vae) or a single deterministic bottleneck conv (cae).
template <typename Scalar>
class Model {
 public:
  using TensorT = Tensor<Scalar>;
  using Latent = LatentMatrix<Scalar>;
  using LayerPtr = std::unique_ptr<nn::Layer<Scalar>>;

  Model(const ModelSpec& spec, std::uint64_t init_seed) : spec_(spec) {
    spec_.validate();
    std::mt19937_64 rng(init_seed);
    build(rng);
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelSpec& spec() const { return spec_; }
  Index latent_dim() const { return spec_.latent_dim(); }

  EncoderOutput<Scalar> encode(const TensorT& x, nn::Mode mode) {
    if (!spec_.variational()) throw std::logic_error("encode: model kind cae has no posterior heads");
    const TensorT h = run_trunk(x, mode);
    return {to_latent(mu_head_->forward(h, mode)), to_latent(log_var_head_->forward(h, mode))};
  }

  TensorT decode(const Latent& z, nn::Mode mode) {
    if (z.cols() != latent_dim()) {
      throw ShapeError("decode: expected latent dim " + std::to_string(latent_dim()) + ", got " + std::to_string(z.cols()));
    }
    const Index b = spec_.bottleneck_size();
    TensorT h(z.rows(), spec_.bottleneck_channels, b, b);
    Eigen::Map<Latent>(h.data(), z.rows(), z.cols()) = z;
    for (auto& layer : decoder_) h = layer->forward(std::move(h), mode);
    return h;
  }

  /// encode -> reparameterize -> decode. A null rng means eps = 0.
  template <typename Rng = std::mt19937_64>
  ForwardResult<Scalar> forward(const TensorT& x, nn::Mode mode, Rng* rng = nullptr) {
    ForwardResult<Scalar> out;
    out.encoding = encode(x, mode);
    const Index n = out.encoding.mu.rows(), d = out.encoding.mu.cols();
    const Latent eps = rng ? standard_normal<Scalar>(n, d, *rng) : Latent::Zero(n, d);
    out.z = reparameterize(out.encoding, eps);
    out.reconstruction = decode(out.z, mode);
    return out;
  }

  /// Deterministic bottleneck code (cae only), one row per sample.
  Latent cae_encode(const TensorT& x, nn::Mode mode) {
    if (spec_.variational()) throw std::logic_error("cae_encode: model kind " + to_string(spec_.kind) + " has no deterministic bottleneck");
    return to_latent(code_head_->forward(run_trunk(x, mode), mode));
  }

  TensorT cae_forward(const TensorT& x, nn::Mode mode) { return decode(cae_encode(x, mode), mode); }

  /// Backpropagates dL/d(reconstruction) through the decoder, accumulating
  /// decoder parameter gradients. Returns dL/dz.
  Latent backward_decoder(const TensorT& d_recon) {
    TensorT g = d_recon;
    for (auto it = decoder_.rbegin(); it != decoder_.rend(); ++it) g = (*it)->backward(g);
    return Eigen::Map<const Latent>(g.data(), g.n(), g.sample_size());
  }

  /// Backpropagates posterior-head gradients through the encoder.
  void backward_encoder(const Latent& d_mu, const Latent& d_log_var) {
    TensorT g = mu_head_->backward(to_tensor(d_mu));
    g.array() += log_var_head_->backward(to_tensor(d_log_var)).array();
    backward_trunk(g);
  }

  /// Backpropagates a bottleneck-code gradient through the encoder (cae).
  void backward_encoder(const Latent& d_code) { backward_trunk(code_head_->backward(to_tensor(d_code))); }

  std::vector<nn::Param<Scalar>*> encoder_parameters() {
    std::vector<nn::Param<Scalar>*> out;
    for (auto& layer : trunk_) append(out, layer->params());
    for (auto* head : {mu_head_.get(), log_var_head_.get(), code_head_.get()}) {
      if (head) append(out, head->params());
    }
    return out;
  }

  std::vector<nn::Param<Scalar>*> decoder_parameters() {
    std::vector<nn::Param<Scalar>*> out;
    for (auto& layer : decoder_) append(out, layer->params());
    return out;
  }

  std::vector<nn::Param<Scalar>*> parameters() {
    auto out = encoder_parameters();
    append(out, decoder_parameters());
    return out;
  }

  std::vector<nn::Buffer<Scalar>*> buffers() {
    std::vector<nn::Buffer<Scalar>*> out;
    for (auto& layer : trunk_) append(out, layer->buffers());
    for (auto& layer : decoder_) append(out, layer->buffers());
    return out;
  }

  /// Every parameterized decoder module, in forward order.
  std::vector<LayerParams<Scalar>> decoder_layers() {
    std::vector<LayerParams<Scalar>> out;
    for (auto& layer : decoder_) {
      auto ps = layer->params();
      if (!ps.empty()) out.push_back({layer->name(), std::move(ps)});
    }
    return out;
  }

  /// Output shape of every encoder-trunk and decoder module for input x.
  std::vector<std::pair<std::string, Shape4>> trace(const TensorT& x, nn::Mode mode = nn::Mode::eval) {
    std::vector<std::pair<std::string, Shape4>> out;
    TensorT h = x;
    for (auto& layer : trunk_) {
      h = layer->forward(h, mode);
      out.emplace_back(layer->name(), h.shape());
    }
    const Index b = spec_.bottleneck_size();
    h = TensorT(x.n(), spec_.bottleneck_channels, b, b);
    out.emplace_back("latent", h.shape());
    for (auto& layer : decoder_) {
      h = layer->forward(h, mode);
      out.emplace_back(layer->name(), h.shape());
    }
    return out;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->grad.setZero();
  }

  Index parameter_count() {
    Index n = 0;
    for (auto* p : parameters()) n += p->value.size();
    return n;
  }

 private:
  template <typename T>
  static void append(std::vector<T>& dst, const std::vector<T>& src) {
    dst.insert(dst.end(), src.begin(), src.end());
  }

  static Latent to_latent(const TensorT& t) { return Eigen::Map<const Latent>(t.data(), t.n(), t.sample_size()); }

  TensorT to_tensor(const Latent& m) const {
    const Index b = spec_.bottleneck_size();
    TensorT t(m.rows(), spec_.bottleneck_channels, b, b);
    Eigen::Map<Latent>(t.data(), m.rows(), m.cols()) = m;
    return t;
  }

  TensorT run_trunk(const TensorT& x, nn::Mode mode) {
    const Shape4 expected{x.n(), spec_.input_channels, spec_.input_size, spec_.input_size};
    require_shape(x.shape(), expected, "encode");
    if (x.n() < 1) throw ShapeError("encode: empty batch");
    TensorT h = x;
    for (auto& layer : trunk_) h = layer->forward(std::move(h), mode);
    return h;
  }

  void backward_trunk(TensorT g) {
    for (auto it = trunk_.rbegin(); it != trunk_.rend(); ++it) g = (*it)->backward(g);
  }

  static bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

  template <typename Rng>
  void build(Rng& rng) {
    Index channels = spec_.input_channels;
    for (std::size_t s = 0; s < spec_.encoder_filters.size(); ++s) {
      const std::string tag = "encoder.conv" + std::to_string(s + 1);
      const Index filters = spec_.encoder_filters[s];
      trunk_.push_back(std::make_unique<nn::Conv2d<Scalar>>(tag, channels, filters, false, rng));
      trunk_.push_back(std::make_unique<nn::BatchNorm2d<Scalar>>(tag + ".bn", filters));
      trunk_.push_back(std::make_unique<nn::LeakyReLU<Scalar>>(tag + ".act", spec_.leaky_slope));
      if (contains(spec_.pool_after, static_cast<int>(s + 1))) {
        trunk_.push_back(std::make_unique<nn::MaxPool2d<Scalar>>(tag + ".pool"));
      }
      channels = filters;
    }
    if (spec_.variational()) {
      mu_head_ = std::make_unique<nn::Conv2d<Scalar>>("encoder.mu", channels, spec_.bottleneck_channels, true, rng);
      log_var_head_ = std::make_unique<nn::Conv2d<Scalar>>("encoder.log_var", channels, spec_.bottleneck_channels, true, rng);
    } else {
      code_head_ = std::make_unique<nn::Conv2d<Scalar>>("encoder.code", channels, spec_.bottleneck_channels, true, rng);
    }

    channels = spec_.bottleneck_channels;
    const std::size_t stages = spec_.decoder_filters.size();
    for (std::size_t s = 0; s < stages; ++s) {
      const std::string tag = "decoder.tconv" + std::to_string(s + 1);
      const Index filters = spec_.decoder_filters[s];
      const bool last = s + 1 == stages;
      decoder_.push_back(std::make_unique<nn::TransposedConv2d<Scalar>>(tag, channels, filters, last, rng));
      if (last) {
        decoder_.push_back(std::make_unique<nn::Tanh<Scalar>>(tag + ".tanh"));
      } else {
        decoder_.push_back(std::make_unique<nn::BatchNorm2d<Scalar>>(tag + ".bn", filters));
        decoder_.push_back(std::make_unique<nn::LeakyReLU<Scalar>>(tag + ".act", spec_.leaky_slope));
      }
      if (contains(spec_.upsample_after, static_cast<int>(s + 1))) {
        decoder_.push_back(std::make_unique<nn::UpsampleBicubic2d<Scalar>>(tag + ".up"));
      }
      channels = filters;
    }
  }

  ModelSpec spec_;
  std::vector<LayerPtr> trunk_;
  std::unique_ptr<nn::Conv2d<Scalar>> mu_head_, log_var_head_, code_head_;
  std::vector<LayerPtr> decoder_;
};

}  // namespace bvae
