#pragma once

#include "bvae/model.hpp"
#include "bvae/objective.hpp"
#include "bvae/optim.hpp"

#include <Eigen/Core>

#include <cmath>
#include <vector>

namespace bvae {

struct StepOptions {
  double beta = 3.0;
  double alpha = 0.0;
  /// Finite-difference step for the Hessian-vector product behind the
  /// gradient-constraint term, relative to the decoder parameter norm.
  double hvp_step = 1e-3;
};

struct StepResult {
  LossBreakdown losses;
  /// Reconstruction-loss gradients of every decoder module (the GradCon signal).
  LayerGradients decoder_grads;
};

namespace detail {

/// Runs decode + full backward of the reconstruction loss only, for fixed z.
/// Leaves every parameter's .grad holding d recon / d theta.
template <typename Scalar>
void recon_backward(Model<Scalar>& model, const Tensor<Scalar>& x, const LatentMatrix<Scalar>& z,
                    const EncoderOutput<Scalar>* enc, const LatentMatrix<Scalar>* eps, nn::Mode mode) {
  const Tensor<Scalar> x_hat = model.decode(z, mode);
  const LatentMatrix<Scalar> dz = model.backward_decoder(recon_loss_grad(x_hat, x));
  if (enc) {
    // z = mu + exp(log_var/2) * eps
    const LatentMatrix<Scalar> d_log_var =
        (dz.array() * eps->array() * (enc->log_var.array() * Scalar(0.5)).exp() * Scalar(0.5)).matrix();
    model.backward_encoder(dz, d_log_var);
  } else {
    model.backward_encoder(dz);
  }
}

}  // namespace detail

/// Computes the training objective J = recon + beta*KL + alpha*L_grad for one
/// batch and leaves dJ/dtheta in every parameter's .grad.
///
/// The gradient-constraint term depends on the decoder's reconstruction
/// gradient g(theta); its parameter gradient is H_recon * u with
/// u = dL_grad/dg, formed by central differences of the reconstruction
/// gradient along u. The encoder trunk caches from the main pass are reused,
/// so the probes only re-run the decoder forward.
///
/// `eps` is ignored for cae models. `mode` is train during optimization;
/// gradient checks pass probe so the function evaluated is stateless.
template <typename Scalar>
StepResult compute_gradients(Model<Scalar>& model, const Tensor<Scalar>& x, const LatentMatrix<Scalar>& eps,
                             const GradientState& state, const StepOptions& opt, nn::Mode mode = nn::Mode::train) {
  StepResult out;
  const bool variational = model.spec().variational();
  model.zero_grad();

  EncoderOutput<Scalar> enc;
  LatentMatrix<Scalar> z;
  if (variational) {
    enc = model.encode(x, mode);
    z = reparameterize(enc, eps);
  } else {
    z = model.cae_encode(x, mode);
  }
  const Tensor<Scalar> x_hat = model.decode(z, mode);

  auto& L = out.losses;
  L.recon = recon_loss(x_hat, x);
  L.kl = variational ? kl_divergence(enc.mu, enc.log_var) : 0.0;
  L.elbo_loss = L.recon + (variational ? opt.beta * L.kl : 0.0);

  // KL does not reach the decoder, so the decoder gradients after this
  // backward pass are exactly the reconstruction-loss gradients.
  const LatentMatrix<Scalar> dz = model.backward_decoder(recon_loss_grad(x_hat, x));
  const auto decoder_layers = model.decoder_layers();
  out.decoder_grads = collect_gradients(decoder_layers);
  if (variational) {
    PosteriorGrad<Scalar> kl = kl_divergence_grad(enc.mu, enc.log_var);
    const Scalar beta = static_cast<Scalar>(opt.beta);
    const LatentMatrix<Scalar> d_mu = dz + beta * kl.d_mu;
    const LatentMatrix<Scalar> d_log_var =
        (dz.array() * eps.array() * (enc.log_var.array() * Scalar(0.5)).exp() * Scalar(0.5)).matrix() + beta * kl.d_log_var;
    model.backward_encoder(d_mu, d_log_var);
  } else {
    model.backward_encoder(dz);
  }

  L.grad_loss = state.k > 0 ? gradient_loss(out.decoder_grads, state) : 0.0;
  L.total_J = total_training_loss(L.elbo_loss, L.grad_loss, opt.alpha);
  if (opt.alpha == 0.0 || state.k == 0) return out;

  // Direction u in decoder parameter space, flattened in parameter order.
  const LayerGradients u_layers = gradient_loss_direction(out.decoder_grads, state);
  const auto params = model.parameters();
  const auto dec_params = model.decoder_parameters();
  Eigen::VectorXd u(flatten_values(dec_params).size());
  {
    Index o = 0;
    for (const auto& v : u_layers) {
      u.segment(o, v.size()) = v;
      o += v.size();
    }
  }
  const double u_norm = u.norm();
  if (u_norm == 0.0) return out;

  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> main_grad = flatten_grads(params);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> theta_dec = flatten_values(dec_params);
  const double h = opt.hvp_step * std::max(1.0, static_cast<double>(theta_dec.norm())) / u_norm;
  const nn::Mode probe_mode = mode == nn::Mode::eval ? nn::Mode::eval : nn::Mode::probe;

  Eigen::VectorXd probe[2];
  for (int side = 0; side < 2; ++side) {
    const double sign = side == 0 ? 1.0 : -1.0;
    assign_values(dec_params, (theta_dec.template cast<double>() + sign * h * u).eval());
    model.zero_grad();
    detail::recon_backward(model, x, z, variational ? &enc : nullptr, variational ? &eps : nullptr, probe_mode);
    probe[side] = flatten_grads(params).template cast<double>();
  }
  assign_values(dec_params, theta_dec);

  const Eigen::VectorXd hvp = (probe[0] - probe[1]) / (2.0 * h);
  assign_grads(params, (main_grad.template cast<double>() + opt.alpha * hvp).eval());
  return out;
}

/// The objective value J for fixed eps, evaluated with a fresh backward pass
/// for the gradient term. Used by gradient checks.
template <typename Scalar>
double evaluate_objective(Model<Scalar>& model, const Tensor<Scalar>& x, const LatentMatrix<Scalar>& eps,
                          const GradientState& state, const StepOptions& opt, nn::Mode mode = nn::Mode::probe) {
  StepOptions no_hvp = opt;
  no_hvp.alpha = 0.0;
  StepResult r = compute_gradients(model, x, eps, state, no_hvp, mode);
  return total_training_loss(r.losses.elbo_loss, r.losses.grad_loss, opt.alpha);
}

}  // namespace bvae
