#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "diprl/errors.hpp"

namespace diprl::env {

enum class Cell : std::uint8_t { empty, tree, wall };
enum class Heading : std::uint8_t { N = 0, E = 1, S = 2, W = 3 };
enum class Action : std::uint8_t { Forward = 0, Backward = 1, TurnLeft = 2, TurnRight = 3, Chop = 4 };

inline constexpr int kNumActions = 5;
inline constexpr std::array<Action, kNumActions> kAllActions{Action::Forward, Action::Backward, Action::TurnLeft,
                                                             Action::TurnRight, Action::Chop};

inline Action action_from_index(int i) {
  if (i < 0 || i >= kNumActions) throw ContractError("action index " + std::to_string(i) + " out of range");
  return static_cast<Action>(i);
}
inline int index_of(Action a) { return static_cast<int>(a); }

struct EnvConfig {
  int grid_size = 12;  // including the wall ring
  int n_trees = 8;
  int view_radius = 2;
  int horizon = 400;
  int max_logs = 4;
  std::uint64_t world_seed = 0;

  int window_side() const { return 2 * view_radius + 1; }
  int observation_size() const { return 3 * window_side() * window_side() + 5; }

  void validate() const {
    if (grid_size < 3) throw ConfigError("env.grid_size must be >= 3");
    if (view_radius < 1) throw ConfigError("env.view_radius must be >= 1");
    if (horizon < 1) throw ConfigError("env.horizon must be >= 1");
    if (max_logs < 1) throw ConfigError("env.max_logs must be >= 1");
    if (n_trees < max_logs) throw ConfigError("env.n_trees must be >= env.max_logs");
  }

  bool operator==(const EnvConfig&) const = default;
};

struct Position {
  int row = 0;
  int col = 0;
  bool operator==(const Position&) const = default;
};

inline Position offset(Heading h) {
  switch (h) {
    case Heading::N: return {-1, 0};
    case Heading::E: return {0, 1};
    case Heading::S: return {1, 0};
    case Heading::W: return {0, -1};
  }
  return {0, 0};
}
inline Heading turn_left(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 3) % 4); }
inline Heading turn_right(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 1) % 4); }

struct WorldState {
  EnvConfig config;
  std::vector<Cell> cells;  // row-major grid_size x grid_size
  Position agent;
  Heading heading = Heading::N;
  int logs_collected = 0;
  int t = 0;

  int size() const { return config.grid_size; }
  bool in_bounds(Position p) const { return p.row >= 0 && p.col >= 0 && p.row < size() && p.col < size(); }
  Cell at(Position p) const {
    return in_bounds(p) ? cells[static_cast<std::size_t>(p.row * size() + p.col)] : Cell::wall;
  }
  Cell& at_mut(Position p) { return cells[static_cast<std::size_t>(p.row * size() + p.col)]; }
  Position ahead() const {
    auto d = offset(heading);
    return {agent.row + d.row, agent.col + d.col};
  }
  bool done() const { return logs_collected >= config.max_logs || t >= config.horizon; }

  bool operator==(const WorldState&) const = default;
};

// Agent-centric window, cell-major with three channels per cell
// (empty, tree, out-of-bounds), then the heading one-hot (N,E,S,W) and
// logs_collected / max_logs.
using Observation = std::vector<double>;

inline Observation emit_observation(const WorldState& s) {
  const int r = s.config.view_radius;
  const int side = s.config.window_side();
  Observation obs(static_cast<std::size_t>(s.config.observation_size()), 0.0);
  const Position fwd = offset(s.heading);
  const Position right = offset(turn_right(s.heading));
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      const int ahead = r - i;
      const int across = j - r;
      const Position p{s.agent.row + ahead * fwd.row + across * right.row,
                       s.agent.col + ahead * fwd.col + across * right.col};
      const auto base = static_cast<std::size_t>((i * side + j) * 3);
      switch (s.at(p)) {
        case Cell::empty: obs[base] = 1.0; break;
        case Cell::tree: obs[base + 1] = 1.0; break;
        case Cell::wall: obs[base + 2] = 1.0; break;
      }
    }
  }
  const auto tail = static_cast<std::size_t>(3 * side * side);
  obs[tail + static_cast<std::size_t>(s.heading)] = 1.0;
  obs[tail + 4] = static_cast<double>(s.logs_collected) / static_cast<double>(s.config.max_logs);
  return obs;
}

/// Index into an observation of `channel` (0 empty, 1 tree, 2 out-of-bounds)
/// at window cell (row, col); row 0 is the far edge in front of the agent.
inline std::size_t window_index(const EnvConfig& cfg, int row, int col, int channel) {
  return static_cast<std::size_t>((row * cfg.window_side() + col) * 3 + channel);
}

namespace detail {

// True when every empty cell is 4-connected to every other empty cell.
inline bool empty_cells_connected(const WorldState& s) {
  const int n = s.size();
  std::vector<char> seen(s.cells.size(), 0);
  std::vector<Position> stack{s.agent};
  seen[static_cast<std::size_t>(s.agent.row * n + s.agent.col)] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    auto p = stack.back();
    stack.pop_back();
    for (int h = 0; h < 4; ++h) {
      auto d = offset(static_cast<Heading>(h));
      Position q{p.row + d.row, p.col + d.col};
      if (s.at(q) != Cell::empty) continue;
      auto idx = static_cast<std::size_t>(q.row * n + q.col);
      if (seen[idx]) continue;
      seen[idx] = 1;
      ++reached;
      stack.push_back(q);
    }
  }
  std::size_t empties = 0;
  for (auto c : s.cells) empties += c == Cell::empty;
  return reached == empties;
}

}  // namespace detail

/// Lays out a world from `config.world_seed`: the outer ring is wall, trees and
/// the spawn are placed on interior cells. Layouts whose empty cells are not
/// connected are redrawn from the same seeded stream.
inline std::pair<WorldState, Observation> reset(const EnvConfig& config) {
  config.validate();
  const int n = config.grid_size;
  const int interior = (n - 2) * (n - 2);
  if (config.n_trees + 1 > interior)
    throw ConfigError("env: " + std::to_string(config.n_trees) + " trees plus the agent do not fit in " +
                      std::to_string(interior) + " free cells");

  std::mt19937_64 rng(config.world_seed);
  std::vector<Position> free;
  free.reserve(static_cast<std::size_t>(interior));
  for (int r = 1; r < n - 1; ++r)
    for (int c = 1; c < n - 1; ++c) free.push_back({r, c});

  for (int attempt = 0; attempt < 1000; ++attempt) {
    WorldState s;
    s.config = config;
    s.cells.assign(static_cast<std::size_t>(n * n), Cell::empty);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        if (r == 0 || c == 0 || r == n - 1 || c == n - 1) s.at_mut({r, c}) = Cell::wall;

    auto order = free;
    std::shuffle(order.begin(), order.end(), rng);
    for (int i = 0; i < config.n_trees; ++i) s.at_mut(order[static_cast<std::size_t>(i)]) = Cell::tree;
    s.agent = order[static_cast<std::size_t>(config.n_trees)];
    s.heading = static_cast<Heading>(std::uniform_int_distribution<int>(0, 3)(rng));
    if (!detail::empty_cells_connected(s)) continue;
    auto obs = emit_observation(s);
    return {std::move(s), std::move(obs)};
  }
  throw ConfigError("env: no connected layout found for world_seed " + std::to_string(config.world_seed));
}

struct StepResult {
  WorldState state;
  Observation observation;
  double hidden_reward = 0.0;
  bool done = false;
};

inline StepResult step(WorldState state, Action action) {
  if (state.done()) throw ProtocolError("env: step called on a finished episode");
  double reward = 0.0;
  switch (action) {
    case Action::Forward:
    case Action::Backward: {
      auto d = offset(state.heading);
      const int sign = action == Action::Forward ? 1 : -1;
      Position target{state.agent.row + sign * d.row, state.agent.col + sign * d.col};
      if (state.at(target) == Cell::empty) state.agent = target;
      break;
    }
    case Action::TurnLeft: state.heading = turn_left(state.heading); break;
    case Action::TurnRight: state.heading = turn_right(state.heading); break;
    case Action::Chop: {
      auto target = state.ahead();
      if (state.at(target) == Cell::tree) {
        state.at_mut(target) = Cell::empty;
        ++state.logs_collected;
        reward = 1.0;
      }
      break;
    }
  }
  ++state.t;
  auto obs = emit_observation(state);
  const bool done = state.done();
  return {std::move(state), std::move(obs), reward, done};
}

/// Hash of the tree layout only; used to count distinct worlds.
inline std::uint64_t layout_hash(const WorldState& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (auto c : s.cells) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace diprl::env
