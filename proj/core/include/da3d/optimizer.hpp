#pragma once

#include <cstdint>

#include "da3d/model.hpp"

namespace da3d {

enum class OptimizerKind { Adam, Sgd };

struct OptimizerHyper {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // L2 term added to the gradient
};

template <typename T>
struct AdamState {
  ModelParams<T> m;
  ModelParams<T> v;
  std::int64_t step = 0;

  static AdamState zeros(const ModelDims& dims) {
    return {ModelParams<T>::zeros(dims), ModelParams<T>::zeros(dims), 0};
  }
};

// Adam with bias correction. With t the step after increment:
//   g   <- g + weight_decay * p
//   m   <- beta1 m + (1 - beta1) g
//   v   <- beta2 v + (1 - beta2) g^2
//   p   <- p - lr * (m / (1 - beta1^t)) / (sqrt(v / (1 - beta2^t)) + eps)
// `learning_rate` overrides hyper.learning_rate (used by schedules).
// Throws DivergenceError if any gradient is non-finite.
template <typename T>
void adam_step(ModelParams<T>& params, const GradientSet<T>& grads, AdamState<T>& state,
               const OptimizerHyper& hyper, double learning_rate);

// Plain gradient descent: p <- p - lr * (g + weight_decay * p).
template <typename T>
void sgd_step(ModelParams<T>& params, const GradientSet<T>& grads,
              const OptimizerHyper& hyper, double learning_rate);

}  // namespace da3d
