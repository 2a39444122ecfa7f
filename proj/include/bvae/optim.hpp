#pragma once

#include "bvae/nn/layers.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace bvae {

struct AdamSettings {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;  // L2 penalty folded into the gradient
};

/// Adam over a fixed parameter list. Weight decay is added to the gradient
/// before the moment updates, so it never enters the training objective.
template <typename Scalar>
class Adam {
 public:
  Adam(std::vector<nn::Param<Scalar>*> params, AdamSettings settings) : params_(std::move(params)), s_(settings) {
    for (auto* p : params_) {
      m_.push_back(nn::Vector<Scalar>::Zero(p->value.size()));
      v_.push_back(nn::Vector<Scalar>::Zero(p->value.size()));
    }
  }

  void step() {
    ++t_;
    const Scalar b1 = Scalar(s_.beta1), b2 = Scalar(s_.beta2);
    const Scalar c1 = Scalar(1.0 - std::pow(s_.beta1, static_cast<double>(t_)));
    const Scalar c2 = Scalar(1.0 - std::pow(s_.beta2, static_cast<double>(t_)));
    const Scalar lr = Scalar(s_.lr), eps = Scalar(s_.eps), wd = Scalar(s_.weight_decay);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      const nn::Vector<Scalar> g = p.grad + wd * p.value;
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * g;
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * g.cwiseProduct(g);
      p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
    }
  }

  double lr() const { return s_.lr; }
  void set_lr(double lr) { s_.lr = lr; }
  long steps() const { return t_; }

 private:
  std::vector<nn::Param<Scalar>*> params_;
  AdamSettings s_;
  std::vector<nn::Vector<Scalar>> m_, v_;
  long t_ = 0;
};

/// Multiplies the learning rate by `factor` once the monitored loss has gone
/// `patience` consecutive epochs without a relative improvement above rel_tol.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor = 0.1, int patience = 10, double rel_tol = 1e-4)
      : lr_(lr), factor_(factor), patience_(patience), rel_tol_(rel_tol) {
    if (!(lr > 0) || !(factor > 0 && factor < 1) || patience < 1 || rel_tol < 0) {
      throw std::invalid_argument("PlateauScheduler: invalid settings");
    }
  }

  /// Records one epoch's validation loss and returns the learning rate to use next.
  double step(double val_loss) {
    if (!std::isfinite(val_loss)) throw std::invalid_argument("PlateauScheduler: validation loss must be finite");
    if (!std::isfinite(best_) || val_loss < best_ - rel_tol_ * std::abs(best_)) {
      best_ = val_loss;
      bad_epochs_ = 0;
    } else if (++bad_epochs_ >= patience_) {
      lr_ *= factor_;
      bad_epochs_ = 0;
    }
    return lr_;
  }

  double lr() const { return lr_; }
  double best() const { return best_; }

 private:
  double lr_, factor_;
  int patience_;
  double rel_tol_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

// ---------------------------------------------------------------------------
// Flat views over parameter lists

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> flatten_values(const std::vector<nn::Param<Scalar>*>& ps) {
  Index n = 0;
  for (const auto* p : ps) n += p->value.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(n);
  Index o = 0;
  for (const auto* p : ps) {
    out.segment(o, p->value.size()) = p->value;
    o += p->value.size();
  }
  return out;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> flatten_grads(const std::vector<nn::Param<Scalar>*>& ps) {
  Index n = 0;
  for (const auto* p : ps) n += p->grad.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(n);
  Index o = 0;
  for (const auto* p : ps) {
    out.segment(o, p->grad.size()) = p->grad;
    o += p->grad.size();
  }
  return out;
}

template <typename Scalar, typename Derived>
void assign_values(const std::vector<nn::Param<Scalar>*>& ps, const Eigen::MatrixBase<Derived>& flat) {
  Index o = 0;
  for (auto* p : ps) {
    p->value = flat.segment(o, p->value.size()).template cast<Scalar>();
    o += p->value.size();
  }
}

template <typename Scalar, typename Derived>
void assign_grads(const std::vector<nn::Param<Scalar>*>& ps, const Eigen::MatrixBase<Derived>& flat) {
  Index o = 0;
  for (auto* p : ps) {
    p->grad = flat.segment(o, p->grad.size()).template cast<Scalar>();
    o += p->grad.size();
  }
}

}  // namespace bvae
