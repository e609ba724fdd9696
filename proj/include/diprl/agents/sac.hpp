#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diprl/ae/autoencoder.hpp"
#include "diprl/data/sampling.hpp"
#include "diprl/nn/adam.hpp"
#include "diprl/reward/reward_model.hpp"

namespace diprl::agents {

using nn::Matrix;
using nn::MlpParams;
using nn::Vector;
using Rng = std::mt19937_64;

enum class AlgoKind { DipRl, Sqil, SacTrue, Bc };

inline const char* to_string(AlgoKind a) {
  switch (a) {
    case AlgoKind::DipRl: return "diprl";
    case AlgoKind::Sqil: return "sqil";
    case AlgoKind::SacTrue: return "sac";
    case AlgoKind::Bc: return "bc";
  }
  return "?";
}

inline AlgoKind algo_from_string(const std::string& s) {
  if (s == "diprl") return AlgoKind::DipRl;
  if (s == "sqil") return AlgoKind::Sqil;
  if (s == "sac") return AlgoKind::SacTrue;
  if (s == "bc") return AlgoKind::Bc;
  throw ConfigError("unknown algorithm '" + s + "' (expected diprl, sqil, sac or bc)");
}

struct SacConfig {
  double gamma = 0.99;
  double alpha = 0.05;
  double polyak = 0.005;
  double lr = 3e-4;
  int batch_size = 64;
  double demo_fraction = 0.25;
  int updates_per_env_step = 1;
  int warmup_steps = 1000;
  int buffer_capacity = 100000;
  int hidden = 64;

  void validate() const {
    if (!(gamma > 0 && gamma < 1)) throw ConfigError("sac.gamma must be in (0, 1)");
    if (!(alpha > 0)) throw ConfigError("sac.alpha must be positive");
    if (!(polyak > 0 && polyak < 1)) throw ConfigError("sac.polyak must be in (0, 1)");
    if (!(lr > 0)) throw ConfigError("sac.lr must be positive");
    if (batch_size < 1 || updates_per_env_step < 1 || buffer_capacity < 1 || hidden < 1)
      throw ConfigError("sac.batch_size, updates_per_env_step, buffer_capacity, hidden must be positive");
    if (demo_fraction < 0 || demo_fraction > 1) throw ConfigError("sac.demo_fraction must be in [0, 1]");
    if (warmup_steps < 0) throw ConfigError("sac.warmup_steps must be >= 0");
  }
};

/// Logits over the action set from an embedding.
struct PolicyNetwork {
  nn::Trainable net;

  static PolicyNetwork create(int latent_dim, int hidden, Rng& rng) {
    const auto h = static_cast<std::size_t>(hidden);
    return {nn::Trainable(nn::make_mlp({static_cast<std::size_t>(latent_dim), h, h, env::kNumActions},
                                       nn::Activation::relu, rng))};
  }
};

/// Twin action-value heads and their slowly averaged targets.
struct CriticPair {
  nn::Trainable q1;
  nn::Trainable q2;
  MlpParams target1;
  MlpParams target2;

  static CriticPair create(int latent_dim, int hidden, Rng& rng) {
    const auto h = static_cast<std::size_t>(hidden);
    const std::initializer_list<std::size_t> sizes{static_cast<std::size_t>(latent_dim), h, h, env::kNumActions};
    CriticPair c;
    c.q1 = nn::Trainable(nn::make_mlp(sizes, nn::Activation::relu, rng));
    c.q2 = nn::Trainable(nn::make_mlp(sizes, nn::Activation::relu, rng));
    c.target1 = c.q1.params;
    c.target2 = c.q2.params;
    return c;
  }
};

/// Column-wise log-softmax.
inline Matrix log_softmax_columns(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double mx = logits.col(j).maxCoeff();
    const double lse = mx + std::log((logits.col(j).array() - mx).exp().sum());
    out.col(j) = logits.col(j).array() - lse;
  }
  return out;
}

inline Vector policy_distribution(const PolicyNetwork& policy, const Vector& embedding) {
  if (embedding.size() != static_cast<Eigen::Index>(policy.net.params.in_dim()))
    throw ShapeError("policy: embedding has " + std::to_string(embedding.size()) + " entries, expected " +
                     std::to_string(policy.net.params.in_dim()));
  return log_softmax_columns(nn::mlp_forward(policy.net.params, embedding)).array().exp();
}

inline double entropy(const Vector& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p(i) > 0) h -= p(i) * std::log(p(i));
  return h;
}

/// Transitions with observations already mapped through the frozen encoder.
struct EncodedBatch {
  Matrix obs;       // latent x B
  Matrix next_obs;  // latent x B
  std::vector<int> actions;
  std::vector<char> done;

  std::size_t size() const { return actions.size(); }
};

inline EncodedBatch encode_transitions(const std::vector<data::Transition>& batch, const ae::AutoencoderModel& encoder) {
  std::vector<const data::Observation*> o, n;
  EncodedBatch eb;
  for (const auto& t : batch) {
    o.push_back(&t.obs);
    n.push_back(&t.next_obs);
    eb.actions.push_back(env::index_of(t.action));
    eb.done.push_back(t.done ? 1 : 0);
  }
  eb.obs = ae::encode_batch(encoder, ae::to_matrix(o));
  eb.next_obs = ae::encode_batch(encoder, ae::to_matrix(n));
  return eb;
}

/// Reward-head inputs [embedding; one-hot action] for every batch column.
inline Matrix reward_inputs(const EncodedBatch& b) {
  Matrix in(b.obs.rows() + env::kNumActions, b.obs.cols());
  for (Eigen::Index j = 0; j < b.obs.cols(); ++j)
    reward::fill_input(in, j, b.obs.col(j), env::action_from_index(b.actions[static_cast<std::size_t>(j)]));
  return in;
}

/// Rewards used for one update. DipRl labels every transition (demo and agent)
/// with one snapshot of the learned reward; Sqil stamps 1 on demo and 0 on
/// agent transitions; SacTrue uses the stored environment reward.
inline std::vector<double> label_rewards(const std::vector<const data::Transition*>& transitions,
                                         const EncodedBatch& encoded, AlgoKind algo,
                                         const reward::RewardModel* reward_model) {
  if (transitions.empty()) throw ContractError("labeling an empty batch");
  std::vector<double> out(transitions.size());
  switch (algo) {
    case AlgoKind::DipRl: {
      if (!reward_model) throw ConfigError("diprl labeling requires a reward model");
      const Vector r = reward::predict_rewards(*reward_model, reward_inputs(encoded));
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = r(static_cast<Eigen::Index>(i));
      break;
    }
    case AlgoKind::Sqil:
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = transitions[i]->source() == data::Source::demo ? 1.0 : 0.0;
      break;
    case AlgoKind::SacTrue:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = transitions[i]->hidden_reward();
      break;
    case AlgoKind::Bc: throw ContractError("behavioral cloning does not label rewards");
  }
  return out;
}

inline std::vector<double> label_batch_rewards(const std::vector<data::Transition>& batch, AlgoKind algo,
                                               const reward::RewardModel* reward_model,
                                               const ae::AutoencoderModel& encoder) {
  std::vector<const data::Transition*> ptrs;
  for (const auto& t : batch) ptrs.push_back(&t);
  EncodedBatch eb;
  if (algo == AlgoKind::DipRl) eb = encode_transitions(batch, encoder);
  return label_rewards(ptrs, eb, algo, reward_model);
}

/// Exact expectation over the action set of min(target Q) - alpha * log pi,
/// one value per column of `embeddings`.
inline Vector soft_target_values(const CriticPair& critics, const PolicyNetwork& policy, const Matrix& embeddings,
                                 double alpha) {
  const Matrix logp = log_softmax_columns(nn::mlp_apply_batch(policy.net.params, embeddings));
  const Matrix qmin = nn::mlp_apply_batch(critics.target1, embeddings)
                          .cwiseMin(nn::mlp_apply_batch(critics.target2, embeddings));
  const Matrix p = logp.array().exp();
  return (p.array() * (qmin.array() - alpha * logp.array())).colwise().sum().transpose();
}

inline double soft_target_value(const CriticPair& critics, const PolicyNetwork& policy, const Vector& embedding,
                                double alpha) {
  return soft_target_values(critics, policy, embedding, alpha)(0);
}

/// r + gamma * (1 - done) * V_target(next).
inline Vector critic_targets(const CriticPair& critics, const PolicyNetwork& policy, const EncodedBatch& b,
                             const std::vector<double>& rewards, const SacConfig& cfg) {
  if (rewards.size() != b.size())
    throw ShapeError("critic: " + std::to_string(rewards.size()) + " rewards for " + std::to_string(b.size()) +
                     " transitions");
  const Vector v = soft_target_values(critics, policy, b.next_obs, cfg.alpha);
  Vector y(static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    y(j) = rewards[i] + (b.done[i] ? 0.0 : cfg.gamma * v(j));
  }
  return y;
}

/// Mean over the batch and both heads of (Q(o,a) - target)^2. Targets are
/// constants: gradients (when requested) reach only the online heads.
inline double critic_loss(const CriticPair& critics, const EncodedBatch& b, const std::vector<double>& rewards,
                          const PolicyNetwork& policy, const SacConfig& cfg, nn::GradBuffer* g1 = nullptr,
                          nn::GradBuffer* g2 = nullptr) {
  const Vector y = critic_targets(critics, policy, b, rewards, cfg);
  const double n = static_cast<double>(b.size());
  double loss = 0.0;
  auto head = [&](const nn::MlpParams& q, nn::GradBuffer* g) {
    const auto trace = nn::mlp_forward_batch(q, b.obs);
    Matrix upstream;
    if (g) upstream = Matrix::Zero(trace.result().rows(), trace.result().cols());
    for (std::size_t i = 0; i < b.size(); ++i) {
      const auto j = static_cast<Eigen::Index>(i);
      const double diff = trace.result()(b.actions[i], j) - y(j);
      loss += diff * diff / (2.0 * n);
      if (g) upstream(b.actions[i], j) = diff / n;
    }
    if (g) nn::accumulate_backward(q, trace, upstream, *g);
  };
  head(critics.q1.params, g1);
  head(critics.q2.params, g2);
  return loss;
}

/// Mean over the batch of sum_a pi(a|o) (alpha log pi(a|o) - min(Q1,Q2)(o,a)).
/// Gradient (when requested) flows into the policy only.
inline double policy_loss(const PolicyNetwork& policy, const CriticPair& critics, const Matrix& embeddings,
                          double alpha, nn::GradBuffer* grad = nullptr) {
  const auto trace = nn::mlp_forward_batch(policy.net.params, embeddings);
  const Matrix logp = log_softmax_columns(trace.result());
  const Matrix p = logp.array().exp();
  const Matrix qmin = nn::mlp_apply_batch(critics.q1.params, embeddings)
                          .cwiseMin(nn::mlp_apply_batch(critics.q2.params, embeddings));
  const Matrix g = alpha * logp - qmin;
  const double n = static_cast<double>(embeddings.cols());
  const double loss = (p.array() * g.array()).sum() / n;
  if (grad) {
    // d/dz_j sum_a p_a g_a = p_j (g_j - sum_a p_a g_a); the alpha * p term cancels.
    const Eigen::RowVectorXd mean_g = (p.array() * g.array()).colwise().sum();
    Matrix upstream = (p.array() * (g.rowwise() - mean_g).array()) / n;
    nn::accumulate_backward(policy.net.params, trace, upstream, *grad);
  }
  return loss;
}

/// target <- (1 - tau) * target + tau * online, for both heads.
inline void polyak_update(CriticPair& c, double tau) {
  auto blend = [tau](MlpParams& target, const MlpParams& online) {
    for (std::size_t i = 0; i < target.layers.size(); ++i) {
      target.layers[i].weight = (1.0 - tau) * target.layers[i].weight + tau * online.layers[i].weight;
      target.layers[i].bias = (1.0 - tau) * target.layers[i].bias + tau * online.layers[i].bias;
    }
  };
  blend(c.target1, c.q1.params);
  blend(c.target2, c.q2.params);
}

/// Mean cross-entropy -log pi(a | o) over encoded demonstration pairs.
inline double bc_loss_encoded(const PolicyNetwork& policy, const Matrix& embeddings, const std::vector<int>& actions,
                              nn::GradBuffer* grad = nullptr) {
  const auto trace = nn::mlp_forward_batch(policy.net.params, embeddings);
  const Matrix logp = log_softmax_columns(trace.result());
  const double n = static_cast<double>(actions.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < actions.size(); ++i) loss -= logp(actions[i], static_cast<Eigen::Index>(i));
  loss /= n;
  if (grad) {
    Matrix upstream = logp.array().exp();
    for (std::size_t i = 0; i < actions.size(); ++i) upstream(actions[i], static_cast<Eigen::Index>(i)) -= 1.0;
    upstream /= n;
    nn::accumulate_backward(policy.net.params, trace, upstream, *grad);
  }
  return loss;
}

inline double bc_loss(const PolicyNetwork& policy, const std::vector<data::Transition>& demo_batch,
                      const ae::AutoencoderModel& encoder) {
  for (const auto& t : demo_batch)
    if (t.source() != data::Source::demo) throw ContractError("bc_loss: batch contains agent transitions");
  const auto eb = encode_transitions(demo_batch, encoder);
  return bc_loss_encoded(policy, eb.obs, eb.actions);
}

inline nlohmann::json to_json(const SacConfig& c) {
  return {{"gamma", c.gamma},
          {"alpha", c.alpha},
          {"polyak", c.polyak},
          {"lr", c.lr},
          {"batch_size", c.batch_size},
          {"demo_fraction", c.demo_fraction},
          {"updates_per_env_step", c.updates_per_env_step},
          {"warmup_steps", c.warmup_steps},
          {"buffer_capacity", c.buffer_capacity},
          {"hidden", c.hidden}};
}

}  // namespace diprl::agents
