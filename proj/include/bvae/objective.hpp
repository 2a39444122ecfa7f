#pragma once

#include "bvae/model.hpp"
#include "bvae/tensor.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bvae {

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One row of the training log.
struct LossBreakdown {
  double recon = 0;
  double kl = 0;
  double elbo_loss = 0;
  double grad_loss = 0;
  double total_J = 0;
};

/// Running arithmetic mean of per-iteration decoder gradients, one flattened
/// vector per parameterized decoder module.
struct GradientState {
  std::vector<std::string> layer_names;
  std::vector<Eigen::VectorXd> average;
  std::int64_t k = 0;

  bool empty() const { return average.empty(); }
};

using LayerGradients = std::vector<Eigen::VectorXd>;

// ---------------------------------------------------------------------------
// Reconstruction term

/// Mean over every element of the batch of (x_hat - x)^2.
template <typename Scalar>
double recon_loss(const Tensor<Scalar>& x_hat, const Tensor<Scalar>& x) {
  require_shape(x_hat.shape(), x.shape(), "recon_loss");
  if (x.size() == 0) throw ShapeError("recon_loss: empty input");
  return (x_hat.array().template cast<double>() - x.array().template cast<double>()).square().mean();
}

/// d recon_loss / d x_hat.
template <typename Scalar>
Tensor<Scalar> recon_loss_grad(const Tensor<Scalar>& x_hat, const Tensor<Scalar>& x) {
  require_shape(x_hat.shape(), x.shape(), "recon_loss_grad");
  Tensor<Scalar> g(x.shape());
  g.array() = (x_hat.array() - x.array()) * static_cast<Scalar>(2.0 / static_cast<double>(x.size()));
  return g;
}

/// Per-sample mean squared error.
template <typename Scalar>
Eigen::VectorXd recon_per_sample(const Tensor<Scalar>& x_hat, const Tensor<Scalar>& x) {
  require_shape(x_hat.shape(), x.shape(), "recon_per_sample");
  Eigen::VectorXd out(x.n());
  const Index m = x.sample_size();
  for (Index i = 0; i < x.n(); ++i) {
    out[i] = (x_hat.array().segment(i * m, m).template cast<double>() - x.array().segment(i * m, m).template cast<double>())
                 .square()
                 .mean();
  }
  return out;
}

// ---------------------------------------------------------------------------
// KL term against the standard normal prior

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite input");
}

/// Per-sample KL(N(mu, exp(log_var)) || N(0, I)) = -1/2 sum_j (1 + log_var - mu^2 - exp(log_var)).
template <typename Scalar>
Eigen::VectorXd kl_per_sample(const LatentMatrix<Scalar>& mu, const LatentMatrix<Scalar>& log_var) {
  if (mu.rows() != log_var.rows() || mu.cols() != log_var.cols()) throw ShapeError("kl_divergence: mu/log_var shape mismatch");
  require_finite(mu, "kl_divergence(mu)");
  require_finite(log_var, "kl_divergence(log_var)");
  const Eigen::ArrayXXd m = mu.template cast<double>().array();
  const Eigen::ArrayXXd lv = log_var.template cast<double>().array();
  // exp(lv) - 1 - lv >= 0 analytically; expm1 keeps it so near lv = 0.
  const Eigen::ArrayXXd excess = lv.unaryExpr([](double v) { return std::expm1(v) - v; });
  return (0.5 * (m.square() + excess)).rowwise().sum().matrix();
}

/// Batch-mean KL divergence; always >= 0.
template <typename Scalar>
double kl_divergence(const LatentMatrix<Scalar>& mu, const LatentMatrix<Scalar>& log_var) {
  if (mu.rows() == 0) throw ShapeError("kl_divergence: empty batch");
  return kl_per_sample(mu, log_var).mean();
}

template <typename Scalar>
struct PosteriorGrad {
  LatentMatrix<Scalar> d_mu;
  LatentMatrix<Scalar> d_log_var;
};

/// Gradient of kl_divergence (batch mean) w.r.t. mu and log_var.
template <typename Scalar>
PosteriorGrad<Scalar> kl_divergence_grad(const LatentMatrix<Scalar>& mu, const LatentMatrix<Scalar>& log_var) {
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(mu.rows());
  PosteriorGrad<Scalar> g;
  g.d_mu = mu * inv_n;
  g.d_log_var = ((log_var.array().exp() - Scalar(1)) * (Scalar(0.5) * inv_n)).matrix();
  return g;
}

/// Negative beta-ELBO: recon + beta * KL.
template <typename Scalar>
double elbo_loss(const Tensor<Scalar>& x, const Tensor<Scalar>& x_hat, const LatentMatrix<Scalar>& mu,
                 const LatentMatrix<Scalar>& log_var, double beta) {
  if (!(beta >= 0)) throw std::invalid_argument("elbo_loss: beta must be >= 0");
  return recon_loss(x_hat, x) + beta * kl_divergence(mu, log_var);
}

inline double total_training_loss(double elbo, double grad_loss, double alpha) {
  if (!(alpha >= 0)) throw std::invalid_argument("total_training_loss: alpha must be >= 0");
  return elbo + alpha * grad_loss;
}

// ---------------------------------------------------------------------------
// Gradient constraint

/// Cosine of the angle between a and b; 0 when either has zero norm.
inline double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

inline void require_matching_layers(const LayerGradients& current, const GradientState& state) {
  if (current.size() != state.average.size()) {
    throw ShapeError("gradient state holds " + std::to_string(state.average.size()) + " layers, got " +
                     std::to_string(current.size()));
  }
  for (std::size_t i = 0; i < current.size(); ++i) {
    if (current[i].size() != state.average[i].size()) {
      const std::string name = i < state.layer_names.size() ? state.layer_names[i] : std::to_string(i);
      throw ShapeError("gradient state layer " + name + ": expected " + std::to_string(state.average[i].size()) +
                       " entries, got " + std::to_string(current[i].size()));
    }
  }
}

/// L_grad = -mean_i cos(avg_i, current_i). Zero when there is no history yet.
inline double gradient_loss(const LayerGradients& current, const GradientState& state) {
  if (state.k == 0) {
    std::cerr << "warning: gradient_loss called with empty gradient history; returning 0\n";
    return 0.0;
  }
  require_matching_layers(current, state);
  double sum = 0;
  for (std::size_t i = 0; i < current.size(); ++i) sum += cosine_similarity(state.average[i], current[i]);
  return -sum / static_cast<double>(current.size());
}

/// d L_grad / d current_i for every layer (zero where a norm vanishes).
inline LayerGradients gradient_loss_direction(const LayerGradients& current, const GradientState& state) {
  require_matching_layers(current, state);
  LayerGradients out(current.size());
  const double scale = -1.0 / static_cast<double>(current.size());
  for (std::size_t i = 0; i < current.size(); ++i) {
    const Eigen::VectorXd& a = state.average[i];
    const Eigen::VectorXd& g = current[i];
    const double na = a.norm(), ng = g.norm();
    if (state.k == 0 || na == 0.0 || ng == 0.0) {
      out[i] = Eigen::VectorXd::Zero(g.size());
      continue;
    }
    const double cos = a.dot(g) / (na * ng);
    out[i] = scale * (a / (na * ng) - g * (cos / (ng * ng)));
  }
  return out;
}

/// Folds one iteration's gradients into the running mean: avg <- (k*avg + g)/(k+1).
inline void accumulate_gradient(GradientState& state, const LayerGradients& current) {
  if (state.k == 0 && state.average.empty()) {
    state.average.reserve(current.size());
    for (const auto& g : current) state.average.push_back(Eigen::VectorXd::Zero(g.size()));
  }
  require_matching_layers(current, state);
  const double kk = static_cast<double>(state.k);
  for (std::size_t i = 0; i < current.size(); ++i) {
    state.average[i] = (kk * state.average[i] + current[i]) / (kk + 1.0);
  }
  ++state.k;
}

inline GradientState update_gradient_average(GradientState state, const LayerGradients& current) {
  accumulate_gradient(state, current);
  return state;
}

/// Flattens the accumulated parameter gradients of each layer.
template <typename Scalar>
LayerGradients collect_gradients(const std::vector<LayerParams<Scalar>>& layers) {
  LayerGradients out;
  out.reserve(layers.size());
  for (const auto& layer : layers) {
    Eigen::VectorXd v(layer.size());
    Index offset = 0;
    for (const auto* p : layer.params) {
      v.segment(offset, p->grad.size()) = p->grad.template cast<double>();
      offset += p->grad.size();
    }
    out.push_back(std::move(v));
  }
  return out;
}

template <typename Scalar>
std::vector<std::string> layer_names(const std::vector<LayerParams<Scalar>>& layers) {
  std::vector<std::string> out;
  for (const auto& l : layers) out.push_back(l.name);
  return out;
}

}  // namespace bvae
