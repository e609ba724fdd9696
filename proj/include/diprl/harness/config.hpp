#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "diprl/agents/train_run.hpp"
#include "diprl/data/demo_io.hpp"

namespace diprl::harness {

struct ExperimentConfig {
  env::EnvConfig env;
  ae::AeConfig ae;
  agents::SacConfig sac;
  reward::RewardConfig reward;
  agents::BcConfig bc;
  agents::AlgoKind algo = agents::AlgoKind::DipRl;
  std::uint64_t run_seed = 0;
  std::int64_t step_budget = 100000;
  int n_demos = 25;
  int eval_episodes = 50;
  std::string output_dir;

  void validate() const {
    env.validate();
    ae.validate(env.observation_size());
    sac.validate();
    reward.validate();
    bc.validate();
    if (n_demos < 1) throw ConfigError("run.n_demos must be >= 1");
    if (step_budget < 0) throw ConfigError("run.steps must be >= 0");
    if (eval_episodes < 1) throw ConfigError("run.eval_episodes must be >= 1");
  }

  agents::TrainConfig train_config() const {
    agents::TrainConfig t;
    t.sac = sac;
    t.reward = reward;
    t.bc = bc;
    t.step_budget = step_budget;
    t.seed = run_seed;
    return t;
  }
};

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw ConfigError(key + ": cannot parse '" + text + "'");
  return value;
}

template <class T>
std::string format_number(T v) {
  if constexpr (std::is_floating_point_v<T>) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  } else {
    return std::to_string(v);
  }
}

}  // namespace detail

/// One settable configuration entry, addressed by its dotted key.
struct ConfigKey {
  std::string name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

/// Every dotted key understood by config files and command-line overrides.
inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    auto num = [&k](std::string name, auto accessor) {
      using Ref = decltype(accessor(std::declval<ExperimentConfig&>()));
      using T = std::remove_reference_t<Ref>;
      k.push_back({name,
                   [name, accessor](ExperimentConfig& c, const std::string& v) {
                     accessor(c) = detail::parse_number<T>(name, v);
                   },
                   [accessor](const ExperimentConfig& c) {
                     return detail::format_number(accessor(const_cast<ExperimentConfig&>(c)));
                   }});
    };
#define DIPRL_KEY(name, expr) num(name, [](ExperimentConfig& c) -> auto& { return c.expr; })
    DIPRL_KEY("env.grid_size", env.grid_size);
    DIPRL_KEY("env.n_trees", env.n_trees);
    DIPRL_KEY("env.view_radius", env.view_radius);
    DIPRL_KEY("env.horizon", env.horizon);
    DIPRL_KEY("env.max_logs", env.max_logs);
    DIPRL_KEY("env.world_seed", env.world_seed);

    DIPRL_KEY("ae.latent_dim", ae.latent_dim);
    DIPRL_KEY("ae.hidden", ae.hidden);
    DIPRL_KEY("ae.weight_decay", ae.weight_decay);
    DIPRL_KEY("ae.recon_l2_coeff", ae.recon_l2_coeff);
    DIPRL_KEY("ae.task_batch_fraction", ae.task_batch_fraction);
    DIPRL_KEY("ae.epochs", ae.epochs);
    DIPRL_KEY("ae.batch_size", ae.batch_size);
    DIPRL_KEY("ae.lr", ae.lr);
    DIPRL_KEY("ae.diverse_episodes", ae.diverse_episodes);

    DIPRL_KEY("sac.gamma", sac.gamma);
    DIPRL_KEY("sac.alpha", sac.alpha);
    DIPRL_KEY("sac.polyak", sac.polyak);
    DIPRL_KEY("sac.lr", sac.lr);
    DIPRL_KEY("sac.batch_size", sac.batch_size);
    DIPRL_KEY("sac.demo_fraction", sac.demo_fraction);
    DIPRL_KEY("sac.updates_per_env_step", sac.updates_per_env_step);
    DIPRL_KEY("sac.warmup_steps", sac.warmup_steps);
    DIPRL_KEY("sac.buffer_capacity", sac.buffer_capacity);
    DIPRL_KEY("sac.hidden", sac.hidden);

    DIPRL_KEY("reward.hidden", reward.hidden);
    DIPRL_KEY("reward.weight_decay", reward.weight_decay);
    DIPRL_KEY("reward.output_l2_coeff", reward.output_l2_coeff);
    DIPRL_KEY("reward.lr", reward.lr);
    DIPRL_KEY("reward.epochs_per_round", reward.epochs_per_round);
    DIPRL_KEY("reward.batch_pairs", reward.batch_pairs);
    DIPRL_KEY("reward.segment_length", reward.segment_length);
    DIPRL_KEY("reward.pairs_per_round", reward.pairs_per_round);
    DIPRL_KEY("reward.round_interval", reward.round_interval);
    DIPRL_KEY("reward.max_pairs", reward.max_pairs);

    DIPRL_KEY("bc.epochs", bc.epochs);
    DIPRL_KEY("bc.batch_size", bc.batch_size);
    DIPRL_KEY("bc.lr", bc.lr);

    DIPRL_KEY("run.seed", run_seed);
    DIPRL_KEY("run.steps", step_budget);
    DIPRL_KEY("run.n_demos", n_demos);
    DIPRL_KEY("run.eval_episodes", eval_episodes);
#undef DIPRL_KEY

    k.push_back({"ae.penalty",
                 [](ExperimentConfig& c, const std::string& v) { c.ae.penalty = ae::ae_penalty_from_string(v); },
                 [](const ExperimentConfig& c) { return std::string(ae::to_string(c.ae.penalty)); }});
    k.push_back({"run.algo",
                 [](ExperimentConfig& c, const std::string& v) { c.algo = agents::algo_from_string(v); },
                 [](const ExperimentConfig& c) { return std::string(agents::to_string(c.algo)); }});
    k.push_back({"run.output_dir", [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
                 [](const ExperimentConfig& c) { return c.output_dir; }});
    return k;
  }();
  return keys;
}

inline const ConfigKey* find_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (k.name == name) return &k;
  return nullptr;
}

inline void set_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const ConfigKey* k = find_key(key);
  if (!k) throw ConfigError("unknown configuration key '" + key + "'");
  k->set(cfg, value);
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Applies `key = value` lines on top of `cfg`. Blank lines and lines starting
/// with '#' are skipped.
inline void apply_config_text(ExperimentConfig& cfg, std::istream& in) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(n, "expected 'key = value'");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    try {
      set_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ParseError(n, e.what());
    }
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  ExperimentConfig cfg;
  apply_config_text(cfg, in);
  return cfg;
}

/// The full configuration in the same `key = value` form apply_config_text reads.
inline std::string dump_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  for (const auto& k : config_keys()) os << k.name << " = " << k.get(cfg) << '\n';
  return os.str();
}

/// Explicit output_dir, else $DIPRL_OUTPUT_DIR, else the working directory.
inline std::string resolve_output_dir(const ExperimentConfig& cfg) {
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env_dir = std::getenv("DIPRL_OUTPUT_DIR"); env_dir && *env_dir) return env_dir;
  return ".";
}

}  // namespace diprl::harness
