#pragma once

#include <cmath>

#include "qcs/nn/tensor.hpp"

namespace qcs::nn {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
  TensorList<Scalar> m;
  TensorList<Scalar> v;
};

/// Bias-corrected Adam update at step t >= 1:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2,
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
template <typename Scalar>
void adam_step(TensorList<Scalar>& params, const TensorList<Scalar>& grads, AdamState<Scalar>& state,
               const AdamParams& cfg, double learning_rate, long t) {
  require(t >= 1, "Adam step index starts at 1");
  if (grads.size() != params.size()) fail(ErrorKind::ShapeMismatch, "gradient list does not match parameters");
  if (state.m.empty()) {
    state.m = zeros_like(params);
    state.v = zeros_like(params);
  }
  const double correction1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const auto b1 = static_cast<Scalar>(cfg.beta1);
  const auto b2 = static_cast<Scalar>(cfg.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape != params[i].shape || state.m[i].shape != params[i].shape)
      fail(ErrorKind::ShapeMismatch, "Adam state shape mismatch");
    auto g = grads[i].data.array();
    state.m[i].data = b1 * state.m[i].data.array() + (Scalar(1) - b1) * g;
    state.v[i].data = b2 * state.v[i].data.array() + (Scalar(1) - b2) * g.square();
    const auto m_hat = state.m[i].data.array() / static_cast<Scalar>(correction1);
    const auto v_hat = state.v[i].data.array() / static_cast<Scalar>(correction2);
    params[i].data.array() -=
        static_cast<Scalar>(learning_rate) * m_hat / (v_hat.sqrt() + static_cast<Scalar>(cfg.epsilon));
  }
}

}  // namespace qcs::nn
