#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diprl/ae/autoencoder.hpp"
#include "diprl/data/sampling.hpp"
#include "diprl/nn/adam.hpp"

namespace diprl::reward {

using nn::Matrix;
using nn::Vector;
using Rng = std::mt19937_64;

struct RewardConfig {
  int hidden = 64;
  double weight_decay = 1e-4;
  double output_l2_coeff = 1e-3;
  double lr = 3e-4;
  int epochs_per_round = 5;
  int batch_pairs = 32;
  int segment_length = 16;
  int pairs_per_round = 200;
  int round_interval = 2000;  // environment steps between preference rounds
  int max_pairs = 10000;      // FIFO cap on the preference dataset

  void validate() const {
    if (hidden < 1 || epochs_per_round < 1 || batch_pairs < 1 || segment_length < 1)
      throw ConfigError("reward: hidden, epochs_per_round, batch_pairs, segment_length must be positive");
    if (weight_decay < 0 || output_l2_coeff < 0) throw ConfigError("reward: coefficients must be >= 0");
    if (!(lr > 0)) throw ConfigError("reward.lr must be positive");
    if (pairs_per_round < 0 || round_interval < 1 || max_pairs < 1)
      throw ConfigError("reward: pairs_per_round >= 0, round_interval >= 1, max_pairs >= 1 required");
  }
};

inline nlohmann::json to_json(const RewardConfig& c) {
  return {{"hidden", c.hidden},
          {"weight_decay", c.weight_decay},
          {"output_l2_coeff", c.output_l2_coeff},
          {"lr", c.lr},
          {"epochs_per_round", c.epochs_per_round},
          {"batch_pairs", c.batch_pairs},
          {"segment_length", c.segment_length},
          {"pairs_per_round", c.pairs_per_round},
          {"round_interval", c.round_interval},
          {"max_pairs", c.max_pairs}};
}

/// r_hat(embedding, action): an MLP over the embedding concatenated with the
/// one-hot action, producing one unbounded scalar.
struct RewardModel {
  nn::Trainable net;
  RewardConfig config;
  int embedding_dim = 0;

  static RewardModel create(int embedding_dim, const RewardConfig& cfg, Rng& rng) {
    cfg.validate();
    RewardModel m;
    m.config = cfg;
    m.embedding_dim = embedding_dim;
    const auto in = static_cast<std::size_t>(embedding_dim + env::kNumActions);
    const auto h = static_cast<std::size_t>(cfg.hidden);
    m.net = nn::Trainable(nn::make_mlp({in, h, h, 1}, nn::Activation::relu, rng));
    return m;
  }
};

/// Writes [embedding; one-hot(action)] into column `col` of `out`.
inline void fill_input(Matrix& out, Eigen::Index col, const Eigen::Ref<const Vector>& embedding, env::Action a) {
  const auto d = embedding.size();
  out.col(col).head(d) = embedding;
  out.col(col).tail(env::kNumActions).setZero();
  out(d + env::index_of(a), col) = 1.0;
}

inline double predict_reward(const RewardModel& m, const Vector& embedding, env::Action a) {
  if (embedding.size() != m.embedding_dim)
    throw ShapeError("reward: embedding has " + std::to_string(embedding.size()) + " entries, expected " +
                     std::to_string(m.embedding_dim));
  Matrix in(m.embedding_dim + env::kNumActions, 1);
  fill_input(in, 0, embedding, a);
  return nn::mlp_apply_batch(m.net.params, in)(0, 0);
}

/// Per-column rewards for prebuilt inputs.
inline Vector predict_rewards(const RewardModel& m, const Matrix& inputs) {
  return nn::mlp_apply_batch(m.net.params, inputs).row(0).transpose();
}

/// Reward-head inputs for every step of a segment, one column per step.
inline Matrix segment_inputs(const data::TrajectorySegment& seg, const ae::AutoencoderModel& encoder) {
  std::vector<const data::Observation*> obs;
  obs.reserve(seg.size());
  for (const auto& s : seg.steps) obs.push_back(&s.obs);
  const Matrix z = ae::encode_batch(encoder, ae::to_matrix(obs));
  Matrix in(z.rows() + env::kNumActions, z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) fill_input(in, j, z.col(j), seg.steps[static_cast<std::size_t>(j)].action);
  return in;
}

inline double segment_return(const RewardModel& m, const data::TrajectorySegment& seg,
                             const ae::AutoencoderModel& encoder) {
  if (seg.steps.empty()) return 0.0;
  return predict_rewards(m, segment_inputs(seg, encoder)).sum();
}

/// Logistic of the return gap, evaluated without overflow for any sign.
inline double bradley_terry(double gap) {
  if (gap >= 0) return 1.0 / (1.0 + std::exp(-gap));
  const double e = std::exp(gap);
  return e / (1.0 + e);
}

/// -log(bradley_terry(gap)), evaluated stably.
inline double neg_log_bradley_terry(double gap) {
  return gap >= 0 ? std::log1p(std::exp(-gap)) : -gap + std::log1p(std::exp(gap));
}

inline double preference_prob(const RewardModel& m, const data::TrajectorySegment& tau_i,
                              const data::TrajectorySegment& tau_j, const ae::AutoencoderModel& encoder) {
  return bradley_terry(segment_return(m, tau_i, encoder) - segment_return(m, tau_j, encoder));
}

struct PreferencePair {
  data::TrajectorySegment preferred;
  data::TrajectorySegment dispreferred;
};

struct PreferenceDataset {
  std::vector<PreferencePair> pairs;
  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

/// Auto-labels n pairs: a demonstration segment is always preferred to an
/// agent segment.
inline PreferenceDataset generate_preferences(const data::DemoDataset& demos, const data::ReplayBuffer& buffer,
                                              std::size_t n_pairs, std::size_t k, Rng& rng) {
  PreferenceDataset out;
  out.pairs.reserve(n_pairs);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    auto demo_seg = data::sample_segment(demos, k, rng);
    auto agent_seg = data::sample_segment(buffer, k, rng);
    out.pairs.push_back({std::move(demo_seg), std::move(agent_seg)});
  }
  return out;
}

/// A pair with both segments already mapped to reward-head inputs.
struct EncodedPair {
  Matrix preferred;
  Matrix dispreferred;
};

inline EncodedPair encode_pair(const PreferencePair& p, const ae::AutoencoderModel& encoder) {
  return {segment_inputs(p.preferred, encoder), segment_inputs(p.dispreferred, encoder)};
}

inline std::vector<EncodedPair> encode_dataset(const PreferenceDataset& d, const ae::AutoencoderModel& encoder) {
  std::vector<EncodedPair> out;
  out.reserve(d.size());
  for (const auto& p : d.pairs) out.push_back(encode_pair(p, encoder));
  return out;
}

struct RewardLoss {
  double total = 0.0;
  double nll = 0.0;        // mean over pairs
  double magnitude = 0.0;  // mean squared per-step reward
};

namespace detail {

// Stacks the pairs as [pref_0 | disp_0 | pref_1 | disp_1 | ...].
inline Matrix stack_pairs(std::span<const EncodedPair* const> pairs, std::vector<Eigen::Index>& widths) {
  Eigen::Index cols = 0, rows = 0;
  widths.clear();
  for (const auto* p : pairs) {
    rows = p->preferred.rows();
    widths.push_back(p->preferred.cols());
    widths.push_back(p->dispreferred.cols());
    cols += p->preferred.cols() + p->dispreferred.cols();
  }
  Matrix all(rows, cols);
  Eigen::Index at = 0;
  for (const auto* p : pairs) {
    all.middleCols(at, p->preferred.cols()) = p->preferred;
    at += p->preferred.cols();
    all.middleCols(at, p->dispreferred.cols()) = p->dispreferred;
    at += p->dispreferred.cols();
  }
  return all;
}

}  // namespace detail

/// Mean Bradley-Terry NLL over the pairs plus output_l2_coeff times the mean
/// squared per-step reward. When `grads` is given the gradient is added to it.
inline RewardLoss reward_loss_encoded(const RewardModel& m, std::span<const EncodedPair* const> pairs,
                                      nn::GradBuffer* grads = nullptr) {
  if (pairs.empty()) throw TrainingError("reward loss over an empty preference set");
  std::vector<Eigen::Index> widths;
  const Matrix inputs = detail::stack_pairs(pairs, widths);
  const auto trace = nn::mlp_forward_batch(m.net.params, inputs);
  const Matrix& r = trace.result();  // 1 x steps
  const double n_pairs = static_cast<double>(pairs.size());
  const double n_steps = static_cast<double>(r.cols());
  const double c = m.config.output_l2_coeff;

  RewardLoss loss;
  loss.magnitude = r.squaredNorm() / n_steps;
  Matrix upstream = (2.0 * c / n_steps) * r;
  Eigen::Index at = 0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto wp = widths[2 * p], wd = widths[2 * p + 1];
    const double gap = r.middleCols(at, wp).sum() - r.middleCols(at + wp, wd).sum();
    loss.nll += neg_log_bradley_terry(gap);
    const double dgap = -bradley_terry(-gap) / n_pairs;
    upstream.middleCols(at, wp).array() += dgap;
    upstream.middleCols(at + wp, wd).array() -= dgap;
    at += wp + wd;
  }
  loss.nll /= n_pairs;
  loss.total = loss.nll + c * loss.magnitude;
  if (grads) nn::accumulate_backward(m.net.params, trace, upstream, *grads);
  return loss;
}

inline RewardLoss reward_loss_encoded(const RewardModel& m, const std::vector<EncodedPair>& pairs) {
  std::vector<const EncodedPair*> ptrs;
  ptrs.reserve(pairs.size());
  for (const auto& p : pairs) ptrs.push_back(&p);
  return reward_loss_encoded(m, ptrs);
}

inline double reward_loss(const RewardModel& m, const PreferenceDataset& d, const ae::AutoencoderModel& encoder) {
  return reward_loss_encoded(m, encode_dataset(d, encoder)).total;
}

/// epochs_per_round shuffled minibatch passes of Adam (with the configured
/// decoupled weight decay) over the pairs.
template <class PairRange>
void train_reward_encoded(RewardModel& m, const PairRange& pairs, Rng& rng) {
  const std::size_t n = std::size(pairs);
  if (n == 0) throw TrainingError("reward: empty preference dataset");
  std::vector<const EncodedPair*> all;
  all.reserve(n);
  for (const auto& p : pairs) all.push_back(&p);
  auto grads = nn::GradBuffer::zeros_like(m.net.params);
  const auto bs = static_cast<std::size_t>(m.config.batch_pairs);
  for (int epoch = 0; epoch < m.config.epochs_per_round; ++epoch) {
    std::shuffle(all.begin(), all.end(), rng);
    for (std::size_t start = 0; start < n; start += bs) {
      const auto len = std::min(bs, n - start);
      grads.set_zero();
      const auto l = reward_loss_encoded(m, std::span<const EncodedPair* const>(all.data() + start, len), &grads);
      if (!std::isfinite(l.total))
        throw NumericError("reward: non-finite loss (nll=" + std::to_string(l.nll) +
                           ", magnitude=" + std::to_string(l.magnitude) + ") at epoch " + std::to_string(epoch));
      nn::adam_step(m.net.params, grads, m.net.adam, m.config.lr, m.config.weight_decay);
    }
  }
}

inline RewardModel train_reward(RewardModel m, const PreferenceDataset& d, const ae::AutoencoderModel& encoder,
                                Rng& rng) {
  train_reward_encoded(m, encode_dataset(d, encoder), rng);
  return m;
}

/// Fraction of pairs whose preferred segment gets the larger predicted return.
template <class PairRange>
double pairwise_accuracy(const RewardModel& m, const PairRange& pairs) {
  std::size_t right = 0, n = 0;
  for (const auto& p : pairs) {
    right += predict_rewards(m, p.preferred).sum() > predict_rewards(m, p.dispreferred).sum();
    ++n;
  }
  return n == 0 ? 0.0 : static_cast<double>(right) / static_cast<double>(n);
}

/// Audit dump: one line per pair naming where each segment came from.
inline void write_preference_audit(std::ostream& out, const PreferenceDataset& d) {
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& p = d.pairs[i];
    out << nlohmann::json{{"pair", i},
                          {"preferred", {{"origin", data::to_string(p.preferred.origin)},
                                         {"episode_id", p.preferred.episode_id},
                                         {"offset", p.preferred.offset},
                                         {"length", p.preferred.size()}}},
                          {"dispreferred", {{"origin", data::to_string(p.dispreferred.origin)},
                                            {"episode_id", p.dispreferred.episode_id},
                                            {"offset", p.dispreferred.offset},
                                            {"length", p.dispreferred.size()}}}}
               .dump()
        << '\n';
  }
}

}  // namespace diprl::reward
