#pragma once

#include <cmath>
#include <cstdint>

#include "diprl/nn/mlp.hpp"

namespace diprl::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<DenseLayer> first_moment;
  std::vector<DenseLayer> second_moment;
  std::int64_t step = 0;

  static AdamState for_params(const MlpParams& p) {
    AdamState s;
    s.first_moment = GradBuffer::zeros_like(p).layers;
    s.second_moment = GradBuffer::zeros_like(p).layers;
    return s;
  }
};

/// One Adam update with decoupled weight decay: every parameter is first
/// shrunk by lr * weight_decay, then moved by the bias-corrected Adam delta.
inline void adam_step(MlpParams& params, const GradBuffer& grads, AdamState& state, double lr,
                      double weight_decay, const AdamConfig& cfg = {}) {
  if (!(lr > 0.0) || !(weight_decay >= 0.0))
    throw ConfigError("adam: need lr > 0 and weight_decay >= 0");
  if (grads.layers.size() != params.layers.size() ||
      state.first_moment.size() != params.layers.size())
    throw ShapeError("adam: gradient/state depth does not match parameters");
  if (!grads.all_finite()) throw NumericError("adam: non-finite gradient entry");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);

  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    if (p.size() != g.size()) throw ShapeError("adam: gradient entry count mismatch");
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    if (weight_decay > 0.0) p *= 1.0 - lr * weight_decay;
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].weight, grads.layers[i].weight, state.first_moment[i].weight,
           state.second_moment[i].weight);
    update(params.layers[i].bias, grads.layers[i].bias, state.first_moment[i].bias,
           state.second_moment[i].bias);
  }
}

/// Network plus its optimizer state.
struct Trainable {
  MlpParams params;
  AdamState adam;

  Trainable() = default;
  explicit Trainable(MlpParams p) : params(std::move(p)), adam(AdamState::for_params(params)) {}
};

}  // namespace diprl::nn
