#pragma once

#include <limits>
#include <tuple>
#include <vector>

#include "diprl/env/chopgrid.hpp"

namespace diprl::env {

/// Scripted demonstrator with full state access. Chops when facing a tree,
/// otherwise takes the first action of a shortest plan (breadth-first over
/// position x heading) that ends facing a tree. Among equally short plans the
/// target tree is chosen in row-major order, then by final heading N,E,S,W;
/// the path to it is the first one found expanding Forward, Backward,
/// TurnLeft, TurnRight in that order.
inline Action scripted_expert(const WorldState& s) {
  if (s.done()) throw ProtocolError("expert: episode already finished");
  if (s.at(s.ahead()) == Cell::tree) return Action::Chop;

  const int n = s.size();
  auto key = [n](Position p, Heading h) {
    return static_cast<std::size_t>((p.row * n + p.col) * 4 + static_cast<int>(h));
  };
  struct Node {
    Position pos;
    Heading heading;
  };
  constexpr int kUnseen = -1;
  std::vector<int> first_action(static_cast<std::size_t>(n * n * 4), kUnseen);
  std::vector<Node> frontier{{s.agent, s.heading}};
  first_action[key(s.agent, s.heading)] = index_of(Action::Chop);  // marks the root

  constexpr std::array<Action, 4> kMoves{Action::Forward, Action::Backward, Action::TurnLeft, Action::TurnRight};
  bool root = true;
  while (!frontier.empty()) {
    std::vector<Node> next;
    using Rank = std::tuple<int, int, int>;
    Rank best{std::numeric_limits<int>::max(), 0, 0};
    int best_action = kUnseen;
    for (const auto& node : frontier) {
      const int inherited = first_action[key(node.pos, node.heading)];
      for (auto a : kMoves) {
        Node m = node;
        if (a == Action::TurnLeft) {
          m.heading = turn_left(node.heading);
        } else if (a == Action::TurnRight) {
          m.heading = turn_right(node.heading);
        } else {
          auto d = offset(node.heading);
          const int sign = a == Action::Forward ? 1 : -1;
          Position q{node.pos.row + sign * d.row, node.pos.col + sign * d.col};
          if (s.at(q) != Cell::empty) continue;
          m.pos = q;
        }
        auto& slot = first_action[key(m.pos, m.heading)];
        if (slot != kUnseen) continue;
        slot = root ? index_of(a) : inherited;
        next.push_back(m);
        auto d = offset(m.heading);
        Position faced{m.pos.row + d.row, m.pos.col + d.col};
        if (s.at(faced) == Cell::tree) {
          Rank r{faced.row, faced.col, static_cast<int>(m.heading)};
          if (r < best) {
            best = r;
            best_action = slot;
          }
        }
      }
    }
    if (best_action != kUnseen) return action_from_index(best_action);
    frontier = std::move(next);
    root = false;
  }
  throw ExpertError("expert: no reachable tree from (" + std::to_string(s.agent.row) + "," +
                    std::to_string(s.agent.col) + ")");
}

}  // namespace diprl::env
