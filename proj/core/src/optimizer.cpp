#include "da3d/optimizer.hpp"

#include <cmath>

#include "da3d/errors.hpp"

namespace da3d {

namespace {

template <typename T>
void require_finite(const GradientSet<T>& grads) {
  for_each_tensor(
      [](const char* name, const auto& g) {
        if (!g.allFinite()) throw DivergenceError(std::string("non-finite gradient in ") + name);
      },
      grads);
}

}  // namespace

template <typename T>
void adam_step(ModelParams<T>& params, const GradientSet<T>& grads, AdamState<T>& state,
               const OptimizerHyper& hyper, double learning_rate) {
  require_finite(grads);
  ++state.step;
  const T b1 = static_cast<T>(hyper.beta1);
  const T b2 = static_cast<T>(hyper.beta2);
  const T eps = static_cast<T>(hyper.epsilon);
  const T lr = static_cast<T>(learning_rate);
  const T wd = static_cast<T>(hyper.weight_decay);
  const T correct1 = static_cast<T>(1.0 - std::pow(hyper.beta1, static_cast<double>(state.step)));
  const T correct2 = static_cast<T>(1.0 - std::pow(hyper.beta2, static_cast<double>(state.step)));

  for_each_tensor(
      [&](const char*, auto& p, const auto& g, auto& m, auto& v) {
        for (Eigen::Index i = 0; i < p.size(); ++i) {
          T gi = g.data()[i];
          if (wd != T(0)) gi += wd * p.data()[i];
          T& mi = m.data()[i];
          T& vi = v.data()[i];
          mi = b1 * mi + (T(1) - b1) * gi;
          vi = b2 * vi + (T(1) - b2) * gi * gi;
          const T m_hat = mi / correct1;
          const T v_hat = vi / correct2;
          p.data()[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
      },
      params, grads, state.m, state.v);
}

template <typename T>
void sgd_step(ModelParams<T>& params, const GradientSet<T>& grads, const OptimizerHyper& hyper,
              double learning_rate) {
  require_finite(grads);
  const T lr = static_cast<T>(learning_rate);
  const T wd = static_cast<T>(hyper.weight_decay);
  for_each_tensor(
      [&](const char*, auto& p, const auto& g) {
        for (Eigen::Index i = 0; i < p.size(); ++i) {
          p.data()[i] -= lr * (g.data()[i] + wd * p.data()[i]);
        }
      },
      params, grads);
}

template void adam_step<float>(ModelParams<float>&, const GradientSet<float>&, AdamState<float>&,
                               const OptimizerHyper&, double);
template void adam_step<double>(ModelParams<double>&, const GradientSet<double>&,
                                AdamState<double>&, const OptimizerHyper&, double);
template void sgd_step<float>(ModelParams<float>&, const GradientSet<float>&,
                              const OptimizerHyper&, double);
template void sgd_step<double>(ModelParams<double>&, const GradientSet<double>&,
                               const OptimizerHyper&, double);

}  // namespace da3d
