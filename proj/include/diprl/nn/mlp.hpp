#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "diprl/errors.hpp"

namespace diprl::nn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

enum class Activation { relu, tanh, identity };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + s + "'");
}

// weight is out x in, so a layer computes weight * x + bias.
struct DenseLayer {
  Matrix weight;
  Vector bias;

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }
};

/// Parameters of a dense feed-forward network. `activations[i]` follows
/// `layers[i]` for every hidden layer; the output layer is always identity.
/// An empty network is the identity map.
struct MlpParams {
  std::vector<DenseLayer> layers;
  std::vector<Activation> activations;

  std::size_t depth() const { return layers.size(); }
  std::size_t in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  Activation activation_after(std::size_t layer) const {
    return layer + 1 < layers.size() ? activations[layer] : Activation::identity;
  }

  void validate() const {
    if (!layers.empty() && activations.size() + 1 != layers.size())
      throw ShapeError("mlp: expected " + std::to_string(layers.size() - 1) +
                       " hidden activations, got " + std::to_string(activations.size()));
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.bias.size() != l.weight.rows())
        throw ShapeError("mlp: layer " + std::to_string(i) + " bias/weight row mismatch");
      if (i > 0 && l.in_dim() != layers[i - 1].out_dim())
        throw ShapeError("mlp: layer " + std::to_string(i) + " input does not chain");
      if (!l.weight.allFinite() || !l.bias.allFinite())
        throw NumericError("mlp: layer " + std::to_string(i) + " holds non-finite values");
    }
  }
};

/// One gradient entry per parameter, laid out like MlpParams.
struct GradBuffer {
  std::vector<DenseLayer> layers;

  static GradBuffer zeros_like(const MlpParams& p) {
    GradBuffer g;
    g.layers.reserve(p.layers.size());
    for (const auto& l : p.layers)
      g.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
    return g;
  }

  void set_zero() {
    for (auto& l : layers) {
      l.weight.setZero();
      l.bias.setZero();
    }
  }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  GradBuffer& operator*=(double s) {
    for (auto& l : layers) {
      l.weight *= s;
      l.bias *= s;
    }
    return *this;
  }

  GradBuffer& operator+=(const GradBuffer& o) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].weight += o.layers[i].weight;
      layers[i].bias += o.layers[i].bias;
    }
    return *this;
  }
};

/// Builds a network with layer widths `sizes` (input first). Weights and
/// biases are drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline MlpParams make_mlp(std::span<const std::size_t> sizes, Activation hidden, Rng& rng) {
  MlpParams p;
  if (sizes.size() < 2) return p;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const auto in = static_cast<Eigen::Index>(sizes[i]);
    const auto out = static_cast<Eigen::Index>(sizes[i + 1]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer l{Matrix(out, in), Vector(out)};
    for (Eigen::Index c = 0; c < in; ++c)
      for (Eigen::Index r = 0; r < out; ++r) l.weight(r, c) = u(rng);
    for (Eigen::Index r = 0; r < out; ++r) l.bias(r) = u(rng);
    p.layers.push_back(std::move(l));
    if (i + 2 < sizes.size()) p.activations.push_back(hidden);
  }
  return p;
}

inline MlpParams make_mlp(std::initializer_list<std::size_t> sizes, Activation hidden, Rng& rng) {
  return make_mlp(std::span<const std::size_t>(sizes.begin(), sizes.size()), hidden, rng);
}

namespace detail {

inline void apply_activation(Matrix& m, Activation a) {
  switch (a) {
    case Activation::relu: m = m.cwiseMax(0.0); break;
    case Activation::tanh: m = m.array().tanh().matrix(); break;
    case Activation::identity: break;
  }
}

// Scales `grad` in place by the activation derivative, expressed through the
// activation's output.
inline void backprop_activation(Matrix& grad, const Matrix& out, Activation a) {
  switch (a) {
    case Activation::relu: grad = (out.array() > 0.0).select(grad, 0.0); break;
    case Activation::tanh: grad.array() *= 1.0 - out.array().square(); break;
    case Activation::identity: break;
  }
}

inline void check_input(const MlpParams& p, Eigen::Index rows) {
  if (!p.layers.empty() && static_cast<std::size_t>(rows) != p.in_dim())
    throw ShapeError("mlp: input has " + std::to_string(rows) + " entries, network expects " +
                     std::to_string(p.in_dim()));
}

}  // namespace detail

/// Layer outputs of a batched forward pass; column j of every matrix belongs
/// to sample j. `outputs[0]` is the input batch itself.
struct ForwardTrace {
  std::vector<Matrix> outputs;

  const Matrix& result() const { return outputs.back(); }
};

inline ForwardTrace mlp_forward_batch(const MlpParams& p, const Matrix& input) {
  detail::check_input(p, input.rows());
  ForwardTrace t;
  t.outputs.reserve(p.layers.size() + 1);
  t.outputs.push_back(input);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto& l = p.layers[i];
    Matrix z = l.weight * t.outputs.back();
    z.colwise() += l.bias;
    detail::apply_activation(z, p.activation_after(i));
    t.outputs.push_back(std::move(z));
  }
  return t;
}

/// Output only; no trace is kept.
inline Matrix mlp_apply_batch(const MlpParams& p, const Matrix& input) {
  detail::check_input(p, input.rows());
  Matrix x = input;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto& l = p.layers[i];
    Matrix z = l.weight * x;
    z.colwise() += l.bias;
    detail::apply_activation(z, p.activation_after(i));
    x = std::move(z);
  }
  return x;
}

inline Vector mlp_forward(const MlpParams& p, const Vector& input) {
  return mlp_apply_batch(p, input);
}

/// Adds the parameter gradients for `upstream` (dLoss/dOutput, one column
/// per sample) into `grads`. If `input_grad` is given it receives dLoss/dInput.
inline void accumulate_backward(const MlpParams& p, const ForwardTrace& trace, const Matrix& upstream,
                                GradBuffer& grads, Matrix* input_grad = nullptr) {
  if (p.layers.empty()) {
    if (input_grad) *input_grad = upstream;
    return;
  }
  if (upstream.rows() != static_cast<Eigen::Index>(p.out_dim()) ||
      upstream.cols() != trace.result().cols())
    throw ShapeError("mlp: upstream gradient is " + std::to_string(upstream.rows()) + "x" +
                     std::to_string(upstream.cols()) + ", output is " +
                     std::to_string(p.out_dim()) + "x" + std::to_string(trace.result().cols()));
  if (grads.layers.size() != p.layers.size())
    throw ShapeError("mlp: gradient buffer depth mismatch");

  Matrix delta = upstream;
  for (std::size_t i = p.layers.size(); i-- > 0;) {
    detail::backprop_activation(delta, trace.outputs[i + 1], p.activation_after(i));
    grads.layers[i].weight.noalias() += delta * trace.outputs[i].transpose();
    grads.layers[i].bias += delta.rowwise().sum();
    if (i > 0 || input_grad) {
      Matrix next = p.layers[i].weight.transpose() * delta;
      delta = std::move(next);
    }
  }
  if (input_grad) *input_grad = std::move(delta);
}

inline GradBuffer mlp_backward(const MlpParams& p, const Vector& input, const Vector& upstream_grad) {
  auto trace = mlp_forward_batch(p, input);
  auto grads = GradBuffer::zeros_like(p);
  accumulate_backward(p, trace, upstream_grad, grads);
  return grads;
}

}  // namespace diprl::nn
