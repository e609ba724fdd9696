#pragma once

#include <exception>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "diprl/data/rollout.hpp"
#include "diprl/env/expert.hpp"
#include "diprl/harness/config.hpp"
#include "diprl/harness/metrics.hpp"
#include "diprl/nn/checkpoint.hpp"

namespace diprl::harness {

namespace fs = std::filesystem;

/// Default file locations inside the output directory.
struct RunPaths {
  fs::path dir;

  explicit RunPaths(const ExperimentConfig& cfg) : dir(resolve_output_dir(cfg)) {}

  fs::path demos() const { return dir / "demos.jsonl"; }
  fs::path autoencoder() const { return dir / "autoencoder.json"; }
  fs::path autoencoder_loss() const { return dir / "autoencoder_loss.csv"; }
  fs::path run_file(agents::AlgoKind algo, std::uint64_t seed, const std::string& what) const {
    return dir / (std::string(agents::to_string(algo)) + "_seed" + std::to_string(seed) + "_" + what);
  }
  fs::path metrics(agents::AlgoKind a, std::uint64_t s) const { return run_file(a, s, "metrics.csv"); }
  fs::path policy(agents::AlgoKind a, std::uint64_t s) const { return run_file(a, s, "policy.json"); }
  fs::path critics(agents::AlgoKind a, std::uint64_t s) const { return run_file(a, s, "critics.json"); }
  fs::path reward(agents::AlgoKind a, std::uint64_t s) const { return run_file(a, s, "reward.json"); }
};

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

inline void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) ensure_dir(file.parent_path());
}

// ---------------------------------------------------------------- gen-demos

/// Writes n_demos scripted-expert episodes and reports the logs of each.
inline data::DemoDataset cmd_gen_demos(const ExperimentConfig& cfg, const fs::path& out_path, std::ostream& log) {
  cfg.validate();
  std::vector<int> logs;
  auto demos = data::generate_expert_demos(cfg.env, cfg.n_demos, &logs);
  ensure_parent(out_path);
  data::save_demos(out_path.string(), cfg.env, demos);
  for (std::size_t e = 0; e < logs.size(); ++e)
    log << "episode " << e << ": " << logs[e] << " logs in " << demos.episode_length(e) << " steps\n";
  log << "wrote " << demos.episode_count() << " episodes (" << demos.size() << " transitions) to " << out_path.string()
      << '\n';
  return demos;
}

// ---------------------------------------------------------------- train-ae

inline void require_file(const fs::path& p, const std::string& what) {
  if (p.empty() || !fs::exists(p)) throw ConfigError(what + " '" + p.string() + "' does not exist");
}

inline data::DemoFile load_matching_demos(const ExperimentConfig& cfg, const fs::path& path) {
  require_file(path, "demo file");
  auto file = data::load_demos(path.string());
  if (!(file.env == cfg.env))
    throw ConfigError("demo file '" + path.string() + "' was generated for a different environment configuration");
  return file;
}

/// Builds the diverse set, trains and freezes the autoencoder, and writes the
/// checkpoint plus a per-epoch loss log.
inline ae::AutoencoderModel cmd_train_ae(const ExperimentConfig& cfg, const fs::path& demo_path,
                                         const fs::path& out_path, const fs::path& loss_path, std::ostream& log) {
  cfg.validate();
  const auto file = load_matching_demos(cfg, demo_path);
  ae::Rng rng = agents::derive_rng(cfg.run_seed, 5);
  const auto diverse = ae::build_diverse_dataset(cfg.env, cfg.ae.diverse_episodes, rng);
  auto model = ae::AutoencoderModel::create(cfg.env.observation_size(), cfg.ae, rng);
  ae::AeTrainingLog training;
  model = ae::train_autoencoder(std::move(model), file.demos, diverse, rng, &training);

  ensure_parent(out_path);
  ae::save_autoencoder(out_path.string(), model);
  ensure_parent(loss_path);
  std::ofstream loss(loss_path, std::ios::binary);
  if (!loss) throw IoError("cannot write loss log '" + loss_path.string() + "'");
  loss << std::setprecision(17) << "epoch,loss,mse\n0," << training.initial_loss << ",\n";
  for (std::size_t e = 0; e < training.epoch_loss.size(); ++e)
    loss << e + 1 << ',' << training.epoch_loss[e] << ',' << training.epoch_mse[e] << '\n';
  log << "autoencoder: probe loss " << training.initial_loss << " -> " << training.epoch_loss.back() << " over "
      << training.epoch_loss.size() << " epochs; wrote " << out_path.string() << '\n';
  return model;
}

// ---------------------------------------------------------------- checkpoints

/// A policy bundled with the frozen encoder it reads and the environment it
/// was trained on, so evaluation needs no other file.
struct PolicyCheckpoint {
  agents::AlgoKind algo = agents::AlgoKind::DipRl;
  std::uint64_t seed = 0;
  env::EnvConfig env;
  ae::AutoencoderModel encoder;
  agents::PolicyNetwork policy;
};

inline nlohmann::json to_json(const PolicyCheckpoint& c) {
  return {{"format", "diprl-policy"},
          {"version", 1},
          {"algo", agents::to_string(c.algo)},
          {"seed", c.seed},
          {"env", env::to_json(c.env)},
          {"autoencoder", ae::to_json(c.encoder)},
          {"policy", nn::to_json(c.policy.net.params)}};
}

inline PolicyCheckpoint load_policy_checkpoint(const std::string& path) {
  const auto j = nn::read_json_file(path);
  try {
    if (j.at("format") != "diprl-policy" || j.at("version") != 1)
      throw IoError("'" + path + "' is not a version 1 policy checkpoint");
    PolicyCheckpoint c;
    c.algo = agents::algo_from_string(j.at("algo").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.env = env::env_config_from_json(j.at("env"));
    c.encoder = ae::autoencoder_from_json(j.at("autoencoder"));
    c.policy.net = nn::Trainable(nn::mlp_from_json(j.at("policy")));
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed policy checkpoint '" + path + "': " + e.what());
  }
}

inline nlohmann::json critics_to_json(const agents::CriticPair& c) {
  return {{"format", "diprl-critics"},
          {"version", 1},
          {"q1", nn::to_json(c.q1.params)},
          {"q2", nn::to_json(c.q2.params)},
          {"target1", nn::to_json(c.target1)},
          {"target2", nn::to_json(c.target2)}};
}

// ---------------------------------------------------------------- train

struct TrainOutput {
  std::vector<MetricsRow> rows;
  fs::path metrics_path;
  fs::path policy_path;
  std::int64_t env_steps = 0;
};

inline std::vector<MetricsRow> metrics_rows(const std::vector<agents::EpisodeStats>& episodes,
                                            agents::AlgoKind algo, std::uint64_t seed) {
  std::vector<MetricsRow> rows;
  rows.reserve(episodes.size());
  for (const auto& e : episodes)
    rows.push_back({e.env_step, e.episode_index, e.logs, e.length, agents::to_string(algo), seed});
  return rows;
}

inline constexpr const char* kBcNote =
    "bc: no environment interaction during training; evaluate the policy checkpoint with the eval command";

/// One training run for cfg.algo and cfg.run_seed. Writes the metrics CSV,
/// the policy checkpoint and (for RL algorithms) critic and reward checkpoints.
inline TrainOutput cmd_train(const ExperimentConfig& cfg, const fs::path& ae_path, const fs::path& demo_path,
                             std::ostream& log) {
  cfg.validate();
  require_file(ae_path, "autoencoder checkpoint");
  auto encoder = ae::load_autoencoder(ae_path.string());
  if (!encoder.frozen()) throw ConfigError("autoencoder checkpoint '" + ae_path.string() + "' is not frozen");
  data::DemoDataset demos;
  if (cfg.algo != agents::AlgoKind::SacTrue || !demo_path.empty()) demos = load_matching_demos(cfg, demo_path).demos;

  const RunPaths paths(cfg);
  ensure_dir(paths.dir);
  agents::TrainResult result;
  try {
    result = agents::train_run(cfg.algo, cfg.env, demos, encoder, cfg.train_config());
  } catch (const Error& e) {
    throw TrainingError(std::string(agents::to_string(cfg.algo)) + " seed " + std::to_string(cfg.run_seed) + ": " +
                        e.what());
  }

  TrainOutput out;
  out.env_steps = result.env_steps;
  out.rows = metrics_rows(result.episodes, cfg.algo, cfg.run_seed);
  out.metrics_path = paths.metrics(cfg.algo, cfg.run_seed);
  out.policy_path = paths.policy(cfg.algo, cfg.run_seed);
  std::vector<std::string> notes;
  if (cfg.algo == agents::AlgoKind::Bc) notes.push_back(kBcNote);
  export_metrics(out.rows, MetricsFormat::csv, out.metrics_path.string(), notes);

  PolicyCheckpoint ckpt{cfg.algo, cfg.run_seed, cfg.env, encoder, result.policy};
  nn::write_json_file(out.policy_path.string(), to_json(ckpt));
  if (cfg.algo != agents::AlgoKind::Bc)
    nn::write_json_file(paths.critics(cfg.algo, cfg.run_seed).string(), critics_to_json(result.critics));
  if (result.reward_model)
    nn::write_json_file(paths.reward(cfg.algo, cfg.run_seed).string(), nn::to_json(result.reward_model->net.params));

  log << agents::to_string(cfg.algo) << " seed " << cfg.run_seed << ": " << result.env_steps << " env steps, "
      << out.rows.size() << " episodes";
  if (!out.rows.empty()) {
    const auto s = compute_summary(out.rows);
    log << ", max logs " << s.max_logs << ", mean logs " << s.mean_logs_per_episode;
  }
  log << "; metrics " << out.metrics_path.string() << '\n';
  return out;
}

/// Runs one training per seed in parallel threads with independent state.
inline std::vector<TrainOutput> cmd_train_seeds(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                                const fs::path& ae_path, const fs::path& demo_path,
                                                std::ostream& log) {
  std::vector<TrainOutput> outputs(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::mutex log_mutex;
  std::vector<std::thread> workers;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    workers.emplace_back([&, i] {
      try {
        ExperimentConfig c = cfg;
        c.run_seed = seeds[i];
        std::ostringstream local;
        outputs[i] = cmd_train(c, ae_path, demo_path, local);
        std::lock_guard lock(log_mutex);
        log << local.str();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return outputs;
}

// ---------------------------------------------------------------- eval

/// Greedy rollouts of a policy checkpoint. The checkpoint's environment must
/// match cfg.env exactly.
inline RunSummary cmd_eval(const fs::path& policy_path, const ExperimentConfig& cfg, int n_episodes) {
  if (n_episodes < 1) throw ConfigError("eval needs at least one episode");
  require_file(policy_path, "policy checkpoint");
  const auto ckpt = load_policy_checkpoint(policy_path.string());
  if (!(ckpt.env == cfg.env))
    throw ConfigError("policy checkpoint '" + policy_path.string() +
                      "' was trained on a different environment configuration");
  return summarize_logs(agents::evaluate_policy(ckpt.policy, ckpt.encoder, cfg.env, n_episodes));
}

/// Evaluation of the scripted expert under the same protocol.
inline RunSummary eval_expert(const env::EnvConfig& env_cfg, int n_episodes) {
  std::vector<int> logs;
  for (int i = 0; i < n_episodes; ++i) {
    int l = 0;
    data::rollout_episode(
        env_cfg, [](const env::WorldState& s, const data::Observation&) { return env::scripted_expert(s); },
        data::Source::agent, &l);
    logs.push_back(l);
  }
  return summarize_logs(logs);
}

/// Uniform-random actions; the reference floor for evaluation.
inline RunSummary eval_random(const env::EnvConfig& env_cfg, int n_episodes, std::uint64_t seed) {
  agents::Rng rng = agents::derive_rng(seed, 6);
  std::uniform_int_distribution<int> pick(0, env::kNumActions - 1);
  std::vector<int> logs;
  for (int i = 0; i < n_episodes; ++i) {
    int l = 0;
    data::rollout_episode(
        env_cfg, [&](const env::WorldState&, const data::Observation&) { return env::action_from_index(pick(rng)); },
        data::Source::agent, &l);
    logs.push_back(l);
  }
  return summarize_logs(logs);
}

// ---------------------------------------------------------------- summarize

inline void print_summary(std::ostream& out, const RunSummary& s) {
  out << "episodes " << s.n_episodes << "\nmax_logs " << s.max_logs << "\nmean_logs_per_episode "
      << std::setprecision(6) << s.mean_logs_per_episode << '\n';
}

}  // namespace diprl::harness
