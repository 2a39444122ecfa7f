#pragma once

#include "bvae/dataset.hpp"
#include "bvae/model.hpp"
#include "bvae/trainer.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

namespace bvae::test {

/// Two-stage micro network: one conv stage with a pool, two decoder stages
/// with one upsample. 2x8x8 input, 2x4x4 bottleneck.
inline ModelSpec micro_spec(ModelKind kind = ModelKind::beta_vae) {
  ModelSpec s;
  s.kind = kind;
  s.input_size = 8;
  s.input_channels = 2;
  s.encoder_filters = {3};
  s.pool_after = {1};
  s.bottleneck_channels = 2;
  s.decoder_filters = {3, 2};
  s.upsample_after = {1};
  return s;
}

/// Reduced ladder on full-size 3x64x64 images, for fast end-to-end tests.
inline ModelSpec small_spec(ModelKind kind = ModelKind::beta_vae) {
  ModelSpec s;
  s.kind = kind;
  s.encoder_filters = {4, 8, 8, 16, 16};
  s.decoder_filters = {16, 16, 8, 8, 4, 3};
  s.bottleneck_channels = 4;
  return s;
}

template <typename Scalar>
Tensor<Scalar> random_tensor(Index n, Index c, Index h, Index w, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<Scalar> t(n, c, h, w);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<Scalar>(u(rng));
  return t;
}

inline Eigen::MatrixXd random_matrix(Index rows, Index cols, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sd);
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

/// Small synthetic split for quick training tests.
inline SynthConfig tiny_synth() {
  SynthConfig c;
  c.train = 24;
  c.validation = 8;
  c.test_normal = 8;
  c.test_abnormal = 8;
  return c;
}

inline TrainingConfig quick_training(int epochs = 2) {
  TrainingConfig t;
  t.epochs = epochs;
  t.batch_size = 8;
  t.lr_init = 1e-2;
  return t;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "bvae") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// FNV-1a over parameter and buffer bytes.
inline std::uint64_t model_hash(Network& model) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const float* p, Index n) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < static_cast<std::size_t>(n) * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (auto* p : model.parameters()) mix(p->value.data(), p->value.size());
  for (auto* b : model.buffers()) mix(b->value.data(), b->value.size());
  return h;
}

}  // namespace bvae::test
