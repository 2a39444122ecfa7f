#pragma once

#include "bvae/dataset.hpp"
#include "bvae/model.hpp"
#include "bvae/objective.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace bvae {

using Real = float;
using Network = Model<Real>;

/// Optimization hyperparameters. Defaults follow the reference settings
/// (Adam, lr 1e-2 decayed x0.1 on plateau, 100 epochs, L2 1e-4, batch 64, beta 3).
struct TrainingConfig {
  double lr_init = 1e-2;
  double lr_decay_factor = 0.1;
  int plateau_patience = 10;
  double plateau_rel_tol = 1e-4;
  int epochs = 100;
  double weight_decay = 1e-4;
  int batch_size = 64;
  double beta = 3.0;
  double alpha = 0.03;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double hvp_step = 1e-3;
  bool augment = true;
  std::uint64_t seed = 0;

  void validate() const;
  /// One key=value line per field, fixed order.
  std::string canonical() const;
};

struct EpochLog {
  int epoch = 0;
  LossBreakdown train;  // batch-weighted means over the epoch
  double val_loss = 0;
  double lr = 0;
};

struct TrainedModel {
  Network model;
  GradientState gradients;
  std::vector<EpochLog> log;
  TrainingConfig config;
  std::string fingerprint;
  int best_epoch = 0;
  std::int64_t iterations = 0;
};

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainHooks {
  std::ostream* progress = nullptr;
  /// Called after every epoch with the current (not best) parameters.
  std::function<void(const EpochLog&, Network&, const GradientState&, bool is_best)> on_epoch;
};

/// 64-bit FNV-1a of the text, as 16 hex digits.
std::string fingerprint(const std::string& text);

/// Fingerprint of the architecture plus the optimization settings.
std::string training_fingerprint(const ModelSpec& spec, const TrainingConfig& cfg);

std::string canonical(const ModelSpec& spec);

/// The settings train() actually uses: a vae always trains with beta = 1.
TrainingConfig effective_config(const ModelSpec& spec, TrainingConfig cfg);

TrainedModel train(const DatasetSplit& split, const ModelSpec& spec, const TrainingConfig& cfg, const TrainHooks& hooks = {});

/// Mean per-sample loss over the validation set in evaluation mode with eps = 0
/// (recon + beta*KL for variational models, recon for cae). Does not touch
/// parameters or gradient state.
double validate_epoch(Network& model, const std::vector<ImageSample>& validation, double beta, int batch_size = 64);

/// Batched evaluation-mode reconstruction (eps = 0) plus per-sample loss terms.
struct Evaluation {
  Tensor<Real> reconstruction;
  Eigen::VectorXd recon;  // per-sample MSE
  Eigen::VectorXd kl;     // per-sample KL, zero for cae
  LatentMatrix<Real> mu;  // posterior means (bottleneck code for cae)
};

Evaluation evaluate(Network& model, const std::vector<ImageSample>& samples, int batch_size = 64);

Eigen::VectorXf snapshot_parameters(Network& model);
Eigen::VectorXf snapshot_buffers(Network& model);
void restore_parameters(Network& model, const Eigen::VectorXf& values);
void restore_buffers(Network& model, const Eigen::VectorXf& values);

/// Process-level allocator settings that keep large activation buffers on
/// the heap between iterations instead of returning them to the kernel.
void tune_allocator();

}  // namespace bvae
