#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "diprl/data/demo_dataset.hpp"

namespace diprl {

namespace env {

inline nlohmann::json to_json(const EnvConfig& c) {
  return {{"grid_size", c.grid_size}, {"n_trees", c.n_trees},   {"view_radius", c.view_radius},
          {"horizon", c.horizon},     {"max_logs", c.max_logs}, {"world_seed", c.world_seed}};
}

inline EnvConfig env_config_from_json(const nlohmann::json& j) {
  EnvConfig c;
  c.grid_size = j.at("grid_size").get<int>();
  c.n_trees = j.at("n_trees").get<int>();
  c.view_radius = j.at("view_radius").get<int>();
  c.horizon = j.at("horizon").get<int>();
  c.max_logs = j.at("max_logs").get<int>();
  c.world_seed = j.at("world_seed").get<std::uint64_t>();
  return c;
}

}  // namespace env

namespace data {

inline constexpr const char* kDemoSchema = "diprl-demos";
inline constexpr int kDemoSchemaVersion = 1;

struct DemoFile {
  env::EnvConfig env;
  DemoDataset demos;
};

// Line 1: {"schema":"diprl-demos","version":1,"env":{...}}
// Then one transition per line:
// {"episode_id":..,"step":..,"obs":[..],"action":..,"next_obs":[..],"done":..,"hidden_reward":..}
inline void write_demos(std::ostream& out, const env::EnvConfig& cfg, const DemoDataset& demos) {
  out << nlohmann::json{{"schema", kDemoSchema}, {"version", kDemoSchemaVersion}, {"env", env::to_json(cfg)}}.dump()
      << '\n';
  for (std::size_t e = 0; e < demos.episode_count(); ++e) {
    std::size_t i = 0;
    for (const auto& t : demos.episode(e)) {
      nlohmann::json rec;
      rec["episode_id"] = e;
      rec["step"] = i++;
      rec["obs"] = t.obs;
      rec["action"] = env::index_of(t.action);
      rec["next_obs"] = t.next_obs;
      rec["done"] = t.done;
      rec["hidden_reward"] = t.hidden_reward();
      out << rec.dump() << '\n';
    }
  }
}

inline DemoFile read_demos(std::istream& in) {
  DemoFile file;
  std::string text;
  std::size_t line_no = 0;

  auto parse = [&](const std::string& s) {
    try {
      return nlohmann::json::parse(s);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("malformed record: ") + e.what());
    }
  };

  if (!std::getline(in, text)) throw ParseError(1, "missing header line");
  line_no = 1;
  try {
    auto header = parse(text);
    if (header.at("schema") != kDemoSchema) throw ParseError(1, "not a demonstration file");
    if (header.at("version").get<int>() != kDemoSchemaVersion)
      throw ParseError(1, "unsupported schema version " + header.at("version").dump());
    file.env = env::env_config_from_json(header.at("env"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, std::string("bad header: ") + e.what());
  }
  const auto obs_len = static_cast<std::size_t>(file.env.observation_size());

  std::vector<Transition> episode;
  std::int64_t current_id = -1;
  auto flush = [&] {
    if (!episode.empty()) file.demos.add_episode(std::move(episode));
    episode.clear();
  };
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    auto rec = parse(text);
    try {
      const auto id = rec.at("episode_id").get<std::int64_t>();
      const auto step = rec.at("step").get<std::size_t>();
      auto obs = rec.at("obs").get<Observation>();
      auto next = rec.at("next_obs").get<Observation>();
      const int action = rec.at("action").get<int>();
      const bool done = rec.at("done").get<bool>();
      const double reward = rec.at("hidden_reward").get<double>();
      if (id != current_id) {
        if (id != current_id + 1) throw ParseError(line_no, "episode ids must be consecutive from 0");
        flush();
        current_id = id;
      }
      if (step != episode.size()) throw ParseError(line_no, "step index out of sequence");
      if (obs.size() != obs_len || next.size() != obs_len)
        throw ParseError(line_no, "observation length does not match env config");
      if (action < 0 || action >= env::kNumActions) throw ParseError(line_no, "action out of range");
      if (reward != 0.0 && reward != 1.0) throw ParseError(line_no, "hidden_reward must be 0 or 1");
      episode.emplace_back(std::move(obs), env::action_from_index(action), std::move(next), done, reward,
                           Source::demo);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("bad field: ") + e.what());
    }
  }
  flush();
  return file;
}

inline void save_demos(const std::string& path, const env::EnvConfig& cfg, const DemoDataset& demos) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_demos(out, cfg, demos);
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline DemoFile load_demos(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return read_demos(in);
}

}  // namespace data
}  // namespace diprl
