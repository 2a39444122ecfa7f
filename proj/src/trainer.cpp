#include "bvae/trainer.hpp"

#include "bvae/errors.hpp"
#include "bvae/optim.hpp"
#include "bvae/step.hpp"

#include <malloc.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace bvae {

void tune_allocator() {
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
}

void TrainingConfig::validate() const {
  auto positive = [](double v, const char* key) {
    if (!(v > 0) || !std::isfinite(v)) throw ConfigError(std::string(key) + " must be > 0");
  };
  positive(lr_init, "lr_init");
  if (weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
  if (!(lr_decay_factor > 0 && lr_decay_factor < 1)) throw ConfigError("lr_decay_factor must lie in (0,1)");
  if (plateau_patience < 1) throw ConfigError("plateau_patience must be >= 1");
  if (plateau_rel_tol < 0) throw ConfigError("plateau_rel_tol must be >= 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(beta >= 0)) throw ConfigError("beta must be >= 0");
  if (!(alpha >= 0)) throw ConfigError("alpha must be >= 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1)) throw ConfigError("adam betas must lie in [0,1)");
  positive(adam_eps, "adam_eps");
  positive(hvp_step, "hvp_step");
}

namespace {

// Shortest text that round-trips.
std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

}  // namespace

std::string TrainingConfig::canonical() const {
  std::ostringstream os;
  os << "lr_init=" << fmt(lr_init) << "\nlr_decay_factor=" << fmt(lr_decay_factor) << "\nplateau_patience=" << plateau_patience
     << "\nplateau_rel_tol=" << fmt(plateau_rel_tol) << "\nepochs=" << epochs << "\nweight_decay=" << fmt(weight_decay)
     << "\nbatch_size=" << batch_size << "\nbeta=" << fmt(beta) << "\nalpha=" << fmt(alpha) << "\nadam_beta1=" << fmt(adam_beta1)
     << "\nadam_beta2=" << fmt(adam_beta2) << "\nadam_eps=" << fmt(adam_eps) << "\nhvp_step=" << fmt(hvp_step)
     << "\naugment=" << (augment ? "true" : "false") << "\nseed=" << seed << "\n";
  return os.str();
}

std::string canonical(const ModelSpec& spec) {
  std::ostringstream os;
  os << "model_kind=" << to_string(spec.kind) << "\ninput_size=" << spec.input_size << "\ninput_channels=" << spec.input_channels
     << "\nencoder_filters=" << join(spec.encoder_filters) << "\npool_after=" << join(spec.pool_after)
     << "\nbottleneck_channels=" << spec.bottleneck_channels << "\ndecoder_filters=" << join(spec.decoder_filters)
     << "\nupsample_after=" << join(spec.upsample_after) << "\nleaky_slope=" << fmt(spec.leaky_slope)
     << "\nlatent_dim=" << spec.latent_dim() << "\n";
  return os.str();
}

std::string fingerprint(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string training_fingerprint(const ModelSpec& spec, const TrainingConfig& cfg) {
  return fingerprint(canonical(spec) + cfg.canonical());
}

// ---------------------------------------------------------------------------

Eigen::VectorXf snapshot_parameters(Network& model) { return flatten_values(model.parameters()); }

Eigen::VectorXf snapshot_buffers(Network& model) {
  const auto bufs = model.buffers();
  Index n = 0;
  for (const auto* b : bufs) n += b->value.size();
  Eigen::VectorXf out(n);
  Index o = 0;
  for (const auto* b : bufs) {
    out.segment(o, b->value.size()) = b->value;
    o += b->value.size();
  }
  return out;
}

void restore_parameters(Network& model, const Eigen::VectorXf& values) {
  const auto ps = model.parameters();
  if (values.size() != flatten_values(ps).size()) throw ShapeError("restore_parameters: size mismatch");
  assign_values(ps, values);
}

void restore_buffers(Network& model, const Eigen::VectorXf& values) {
  Index o = 0;
  for (auto* b : model.buffers()) {
    if (o + b->value.size() > values.size()) throw ShapeError("restore_buffers: size mismatch");
    b->value = values.segment(o, b->value.size());
    o += b->value.size();
  }
  if (o != values.size()) throw ShapeError("restore_buffers: size mismatch");
}

Evaluation evaluate(Network& model, const std::vector<ImageSample>& samples, int batch_size) {
  Evaluation out;
  const Index n = static_cast<Index>(samples.size());
  out.reconstruction = Tensor<Real>(n, kImageChannels, kImageSize, kImageSize);
  out.recon.resize(n);
  out.kl = Eigen::VectorXd::Zero(n);
  out.mu.resize(n, model.latent_dim());
  const Index m = out.reconstruction.sample_size();
  for (Index start = 0; start < n; start += batch_size) {
    const Index count = std::min<Index>(batch_size, n - start);
    std::vector<std::size_t> idx(static_cast<std::size_t>(count));
    std::iota(idx.begin(), idx.end(), static_cast<std::size_t>(start));
    const Tensor<Real> x = make_batch(samples, idx);
    Tensor<Real> x_hat;
    if (model.spec().variational()) {
      auto r = model.forward(x, nn::Mode::eval);
      out.kl.segment(start, count) = kl_per_sample(r.encoding.mu, r.encoding.log_var);
      out.mu.middleRows(start, count) = r.encoding.mu;
      x_hat = std::move(r.reconstruction);
    } else {
      const LatentMatrix<Real> code = model.cae_encode(x, nn::Mode::eval);
      out.mu.middleRows(start, count) = code;
      x_hat = model.decode(code, nn::Mode::eval);
    }
    out.recon.segment(start, count) = recon_per_sample(x_hat, x);
    out.reconstruction.array().segment(start * m, count * m) = x_hat.array();
  }
  return out;
}

double validate_epoch(Network& model, const std::vector<ImageSample>& validation, double beta, int batch_size) {
  if (validation.empty()) throw ConfigError("validation set is empty");
  const Evaluation e = evaluate(model, validation, batch_size);
  const double kl_weight = model.spec().variational() ? beta : 0.0;
  return (e.recon + kl_weight * e.kl).mean();
}

namespace {

std::uint64_t mix_seed(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void require_labels(const std::vector<ImageSample>& samples, const char* split) {
  for (const auto& s : samples) {
    if (s.label == Label::abnormal) throw ConfigError(std::string(split) + " split contains abnormal sample " + s.id);
  }
}

}  // namespace

TrainingConfig effective_config(const ModelSpec& spec, TrainingConfig cfg) {
  if (spec.kind == ModelKind::vae) cfg.beta = 1.0;
  return cfg;
}

TrainedModel train(const DatasetSplit& split, const ModelSpec& spec, const TrainingConfig& requested, const TrainHooks& hooks) {
  const TrainingConfig cfg = effective_config(spec, requested);
  cfg.validate();
  spec.validate();
  if (split.train.empty()) throw ConfigError("training split is empty");
  if (split.validation.empty()) throw ConfigError("validation split is empty");
  require_labels(split.train, "train");
  require_labels(split.validation, "validation");

  TrainedModel out{Network(spec, mix_seed(cfg.seed)), {}, {}, cfg, training_fingerprint(spec, cfg), 0, 0};
  Network& model = out.model;
  GradientState& state = out.gradients;
  state.layer_names = layer_names(model.decoder_layers());

  std::mt19937_64 rng(cfg.seed);
  Adam<Real> adam(model.parameters(), {cfg.lr_init, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.weight_decay});
  PlateauScheduler scheduler(cfg.lr_init, cfg.lr_decay_factor, cfg.plateau_patience, cfg.plateau_rel_tol);
  const StepOptions step_opt{cfg.beta, cfg.alpha, cfg.hvp_step};

  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), 0);
  double best_val = std::numeric_limits<double>::infinity();
  Eigen::VectorXf best_params = snapshot_parameters(model), best_buffers = snapshot_buffers(model);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog row;
    row.epoch = epoch;
    row.lr = adam.lr();
    std::size_t seen = 0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
      std::vector<ImageSample> batch_samples;
      batch_samples.reserve(count);
      for (std::size_t j = 0; j < count; ++j) {
        const ImageSample& s = split.train[order[start + j]];
        batch_samples.push_back(cfg.augment ? augment(s, rng) : s);
      }
      const Tensor<Real> x = make_batch(batch_samples);
      const LatentMatrix<Real> eps =
          spec.variational() ? standard_normal<Real>(static_cast<Index>(count), model.latent_dim(), rng) : LatentMatrix<Real>();

      const StepResult step = compute_gradients(model, x, eps, state, step_opt, nn::Mode::train);
      const LossBreakdown& L = step.losses;
      bool finite = std::isfinite(L.total_J);
      for (auto* p : model.parameters()) finite = finite && p->grad.allFinite();
      if (!finite) {
        std::ostringstream os;
        os << "non-finite training loss at epoch " << epoch << ", batch " << batch_index << ": recon=" << L.recon << " kl=" << L.kl
           << " grad_loss=" << L.grad_loss << " J=" << L.total_J;
        throw TrainingAborted(os.str());
      }
      adam.step();
      accumulate_gradient(state, step.decoder_grads);
      ++out.iterations;

      const double w = static_cast<double>(count);
      row.train.recon += w * L.recon;
      row.train.kl += w * L.kl;
      row.train.elbo_loss += w * L.elbo_loss;
      row.train.grad_loss += w * L.grad_loss;
      row.train.total_J += w * L.total_J;
      seen += count;
    }
    const double inv = 1.0 / static_cast<double>(seen);
    row.train.recon *= inv;
    row.train.kl *= inv;
    row.train.elbo_loss *= inv;
    row.train.grad_loss *= inv;
    row.train.total_J *= inv;

    row.val_loss = validate_epoch(model, split.validation, cfg.beta, cfg.batch_size);
    if (!std::isfinite(row.val_loss)) throw TrainingAborted("non-finite validation loss at epoch " + std::to_string(epoch));
    const bool is_best = row.val_loss < best_val;
    if (is_best) {
      best_val = row.val_loss;
      best_params = snapshot_parameters(model);
      best_buffers = snapshot_buffers(model);
      out.best_epoch = epoch;
    }
    out.log.push_back(row);
    if (hooks.progress) {
      *hooks.progress << "epoch " << epoch << "/" << cfg.epochs << "  recon " << row.train.recon << "  kl " << row.train.kl
                      << "  grad " << row.train.grad_loss << "  J " << row.train.total_J << "  val " << row.val_loss << "  lr "
                      << row.lr << (is_best ? "  *" : "") << '\n';
    }
    if (hooks.on_epoch) hooks.on_epoch(row, model, state, is_best);
    adam.set_lr(scheduler.step(row.val_loss));
  }

  restore_parameters(model, best_params);
  restore_buffers(model, best_buffers);
  return out;
}

}  // namespace bvae
