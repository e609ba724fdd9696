#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "diprl/agents/sac.hpp"

namespace diprl::agents {

struct BcConfig {
  int epochs = 200;
  int batch_size = 64;
  double lr = 1e-3;

  void validate() const {
    if (epochs < 1 || batch_size < 1 || !(lr > 0)) throw ConfigError("bc.epochs, bc.batch_size, bc.lr must be positive");
  }
};

struct TrainConfig {
  SacConfig sac;
  reward::RewardConfig reward;
  BcConfig bc;
  std::int64_t step_budget = 100000;
  std::uint64_t seed = 0;
};

struct EpisodeStats {
  std::int64_t env_step = 0;  // environment steps taken when the episode ended
  std::int64_t episode_index = 0;
  int logs = 0;
  int length = 0;
};

struct TrainResult {
  PolicyNetwork policy;
  CriticPair critics;
  std::optional<reward::RewardModel> reward_model;
  std::vector<EpisodeStats> episodes;
  std::int64_t env_steps = 0;
  std::int64_t updates = 0;
  int reward_rounds = 0;
};

/// Independent, reproducible random streams derived from one run seed.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x9e3779b9u};
  return Rng(seq);
}

inline int sample_action(const Vector& probs, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng), acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs(i);
    if (x < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

inline int greedy_action(const PolicyNetwork& policy, const Vector& embedding) {
  Eigen::Index best = 0;
  nn::mlp_forward(policy.net.params, embedding).maxCoeff(&best);
  return static_cast<int>(best);
}

/// Supervised epochs over the demonstrations. No environment interaction.
inline PolicyNetwork train_bc(PolicyNetwork policy, const data::DemoDataset& demos, const ae::AutoencoderModel& encoder,
                              const BcConfig& cfg, Rng& rng) {
  if (demos.empty()) throw TrainingError("bc: no demonstrations");
  std::vector<const data::Observation*> obs;
  std::vector<int> actions;
  for (const auto& t : demos.transitions()) {
    obs.push_back(&t.obs);
    actions.push_back(env::index_of(t.action));
  }
  const Matrix emb = ae::encode_batch(encoder, ae::to_matrix(obs));
  std::vector<std::size_t> order(actions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto grad = nn::GradBuffer::zeros_like(policy.net.params);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const auto len = std::min(bs, order.size() - start);
      Matrix x(emb.rows(), static_cast<Eigen::Index>(len));
      std::vector<int> a(len);
      for (std::size_t i = 0; i < len; ++i) {
        x.col(static_cast<Eigen::Index>(i)) = emb.col(static_cast<Eigen::Index>(order[start + i]));
        a[i] = actions[order[start + i]];
      }
      grad.set_zero();
      const double l = bc_loss_encoded(policy, x, a, &grad);
      if (!std::isfinite(l)) throw NumericError("bc: non-finite loss at epoch " + std::to_string(epoch));
      nn::adam_step(policy.net.params, grad, policy.net.adam, cfg.lr, 0.0);
    }
  }
  return policy;
}

namespace detail {

// Encoded copies of everything the learner samples, filled once per transition.
struct EmbeddingCache {
  Matrix buffer_obs, buffer_next;  // latent x capacity, indexed by slot
  Matrix demo_obs, demo_next;      // latent x M, indexed by flat demo index
};

inline bool has_segment(const data::ReplayBuffer& b, std::size_t k) {
  for (std::size_t e = 0; e < b.episode_count(); ++e)
    if (b.episode_length(e) >= k) return true;
  return false;
}

}  // namespace detail

/// One full training run. Bc trains offline on demonstrations only; the other
/// algorithms interact with the environment for `step_budget` steps, each
/// step followed (after warmup) by `updates_per_env_step` critic, policy and
/// target updates on a batch labeled per `algo`. DipRl additionally refreshes
/// its preference set and reward model every `reward.round_interval` steps.
inline TrainResult train_run(AlgoKind algo, const env::EnvConfig& env_cfg, const data::DemoDataset& demos,
                             const ae::AutoencoderModel& encoder, const TrainConfig& cfg,
                             const std::function<void(const EpisodeStats&)>& on_episode = {}) {
  cfg.sac.validate();
  cfg.reward.validate();
  cfg.bc.validate();
  if (!encoder.frozen()) throw ContractError("train_run: encoder must be frozen before RL");
  if (encoder.obs_dim() != env_cfg.observation_size())
    throw ConfigError("train_run: encoder expects " + std::to_string(encoder.obs_dim()) +
                      " observation entries, environment emits " + std::to_string(env_cfg.observation_size()));
  const bool uses_demos = algo != AlgoKind::SacTrue;
  if (uses_demos && demos.empty()) throw ConfigError(std::string(to_string(algo)) + " requires demonstrations");

  Rng init_rng = derive_rng(cfg.seed, 1);
  Rng act_rng = derive_rng(cfg.seed, 2);
  Rng batch_rng = derive_rng(cfg.seed, 3);
  Rng pref_rng = derive_rng(cfg.seed, 4);

  const int latent = encoder.latent_dim();
  TrainResult result;
  result.policy = PolicyNetwork::create(latent, cfg.sac.hidden, init_rng);
  result.critics = CriticPair::create(latent, cfg.sac.hidden, init_rng);

  if (algo == AlgoKind::Bc) {
    result.policy = train_bc(std::move(result.policy), demos, encoder, cfg.bc, batch_rng);
    return result;
  }
  if (algo == AlgoKind::DipRl) result.reward_model = reward::RewardModel::create(latent, cfg.reward, init_rng);

  const SacConfig& sac = cfg.sac;
  const double demo_fraction = uses_demos ? sac.demo_fraction : 0.0;
  data::ReplayBuffer buffer(static_cast<std::size_t>(sac.buffer_capacity));
  const data::DemoDataset no_demos;
  const data::DemoDataset& batch_demos = uses_demos ? demos : no_demos;

  detail::EmbeddingCache cache;
  cache.buffer_obs.resize(latent, sac.buffer_capacity);
  cache.buffer_next.resize(latent, sac.buffer_capacity);
  if (uses_demos) {
    std::vector<const data::Observation*> o, n;
    for (const auto& t : demos.transitions()) {
      o.push_back(&t.obs);
      n.push_back(&t.next_obs);
    }
    cache.demo_obs = ae::encode_batch(encoder, ae::to_matrix(o));
    cache.demo_next = ae::encode_batch(encoder, ae::to_matrix(n));
  }

  std::deque<reward::EncodedPair> preferences;
  std::int64_t last_round = -1;
  const auto k = static_cast<std::size_t>(cfg.reward.segment_length);

  auto reward_round = [&] {
    auto fresh = reward::generate_preferences(demos, buffer, static_cast<std::size_t>(cfg.reward.pairs_per_round), k,
                                              pref_rng);
    for (const auto& p : fresh.pairs) preferences.push_back(reward::encode_pair(p, encoder));
    while (preferences.size() > static_cast<std::size_t>(cfg.reward.max_pairs)) preferences.pop_front();
    if (!preferences.empty()) reward::train_reward_encoded(*result.reward_model, preferences, pref_rng);
    ++result.reward_rounds;
  };

  auto g1 = nn::GradBuffer::zeros_like(result.critics.q1.params);
  auto g2 = nn::GradBuffer::zeros_like(result.critics.q2.params);
  auto gp = nn::GradBuffer::zeros_like(result.policy.net.params);
  EncodedBatch batch;
  batch.obs.resize(latent, sac.batch_size);
  batch.next_obs.resize(latent, sac.batch_size);
  std::vector<const data::Transition*> batch_transitions;

  auto update = [&](std::int64_t env_step) {
    const auto refs = data::sample_mixed_refs(buffer, batch_demos, static_cast<std::size_t>(sac.batch_size),
                                              demo_fraction, batch_rng);
    batch.actions.clear();
    batch.done.clear();
    batch_transitions.clear();
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const auto j = static_cast<Eigen::Index>(i);
      const auto idx = static_cast<Eigen::Index>(refs[i].index);
      const data::Transition& t = data::resolve(refs[i], buffer, batch_demos);
      const bool demo = refs[i].source == data::Source::demo;
      batch.obs.col(j) = demo ? cache.demo_obs.col(idx) : cache.buffer_obs.col(idx);
      batch.next_obs.col(j) = demo ? cache.demo_next.col(idx) : cache.buffer_next.col(idx);
      batch.actions.push_back(env::index_of(t.action));
      batch.done.push_back(t.done ? 1 : 0);
      batch_transitions.push_back(&t);
    }
    const auto rewards =
        label_rewards(batch_transitions, batch, algo, result.reward_model ? &*result.reward_model : nullptr);

    g1.set_zero();
    g2.set_zero();
    const double lq = critic_loss(result.critics, batch, rewards, result.policy, sac, &g1, &g2);
    gp.set_zero();
    const double lp = policy_loss(result.policy, result.critics, batch.obs, sac.alpha, &gp);
    if (!std::isfinite(lq) || !std::isfinite(lp))
      throw NumericError("train: non-finite loss at env step " + std::to_string(env_step) +
                         " (critic=" + std::to_string(lq) + ", policy=" + std::to_string(lp) + ")");
    nn::adam_step(result.critics.q1.params, g1, result.critics.q1.adam, sac.lr, 0.0);
    nn::adam_step(result.critics.q2.params, g2, result.critics.q2.adam, sac.lr, 0.0);
    nn::adam_step(result.policy.net.params, gp, result.policy.net.adam, sac.lr, 0.0);
    polyak_update(result.critics, sac.polyak);
    ++result.updates;
  };

  auto [state, obs] = env::reset(env_cfg);
  Vector emb = ae::encode(encoder, obs);
  std::vector<data::Transition> episode;
  std::vector<Vector> episode_emb, episode_next_emb;
  std::uniform_int_distribution<int> uniform_action(0, env::kNumActions - 1);

  for (std::int64_t step = 0; step < cfg.step_budget; ++step) {
    const int a = step < sac.warmup_steps ? uniform_action(act_rng)
                                          : sample_action(policy_distribution(result.policy, emb), act_rng);
    auto r = env::step(state, env::action_from_index(a));
    Vector next_emb = ae::encode(encoder, r.observation);
    episode.emplace_back(std::move(obs), env::action_from_index(a), r.observation, r.done, r.hidden_reward,
                         data::Source::agent);
    episode_emb.push_back(emb);
    episode_next_emb.push_back(next_emb);
    ++result.env_steps;

    if (r.done) {
      EpisodeStats stats{step + 1, static_cast<std::int64_t>(result.episodes.size()), r.state.logs_collected, r.state.t};
      const auto slots = buffer.append_episode(std::move(episode));
      for (std::size_t i = 0; i < slots.size(); ++i) {
        cache.buffer_obs.col(static_cast<Eigen::Index>(slots[i])) = episode_emb[i];
        cache.buffer_next.col(static_cast<Eigen::Index>(slots[i])) = episode_next_emb[i];
      }
      episode.clear();
      episode_emb.clear();
      episode_next_emb.clear();
      result.episodes.push_back(stats);
      if (on_episode) on_episode(stats);
      std::tie(state, obs) = env::reset(env_cfg);
      emb = ae::encode(encoder, obs);
    } else {
      state = std::move(r.state);
      obs = std::move(r.observation);
      emb = std::move(next_emb);
    }

    if (step + 1 < sac.warmup_steps || buffer.empty()) continue;
    if (algo == AlgoKind::DipRl) {
      const bool due = last_round < 0 || step - last_round >= cfg.reward.round_interval;
      if (due && detail::has_segment(buffer, k)) {
        reward_round();
        last_round = step;
      }
      if (result.reward_rounds == 0) continue;
    }
    for (int u = 0; u < sac.updates_per_env_step; ++u) update(step);
  }
  return result;
}

/// Greedy (argmax) rollouts; returns logs collected per episode.
inline std::vector<int> evaluate_policy(const PolicyNetwork& policy, const ae::AutoencoderModel& encoder,
                                        const env::EnvConfig& env_cfg, int n_episodes) {
  std::vector<int> logs;
  for (int i = 0; i < n_episodes; ++i) {
    int l = 0;
    data::rollout_episode(
        env_cfg,
        [&](const env::WorldState&, const data::Observation& o) {
          return env::action_from_index(greedy_action(policy, ae::encode(encoder, o)));
        },
        data::Source::agent, &l);
    logs.push_back(l);
  }
  return logs;
}

}  // namespace diprl::agents
