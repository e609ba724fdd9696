#pragma once

#include <cstdint>
#include <algorithm>
#include <deque>
#include <vector>

#include "diprl/data/transition.hpp"

namespace diprl::data {

/// FIFO ring of agent transitions. Transition number `a` (counting every
/// insertion ever made) lives in slot a % capacity until evicted. Only
/// episodes that are still fully present are visible to segment sampling.
class ReplayBuffer {
 public:
  struct EpisodeSpan {
    std::uint64_t id;     // running episode counter
    std::uint64_t first;  // absolute insertion index of step 0
    std::size_t length;
  };

  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
    ring_.reserve(std::min<std::size_t>(capacity, 1u << 16));
  }

  /// Appends an episode in order and returns the slot of each transition.
  std::vector<std::size_t> append_episode(std::vector<Transition> episode) {
    for (const auto& t : episode)
      if (t.source() != Source::agent) throw ContractError("replay buffer: only agent transitions may be appended");
    std::vector<std::size_t> slots;
    slots.reserve(episode.size());
    const std::uint64_t first = inserted_;
    for (auto& t : episode) {
      const auto slot = static_cast<std::size_t>(inserted_ % capacity_);
      if (ring_.size() < capacity_) {
        ring_.push_back(std::move(t));
      } else {
        ring_[slot] = std::move(t);
      }
      slots.push_back(slot);
      ++inserted_;
    }
    if (!episode.empty()) spans_.push_back({next_episode_id_, first, episode.size()});
    ++next_episode_id_;
    const std::uint64_t oldest = oldest_absolute();
    while (!spans_.empty() && spans_.front().first < oldest) spans_.pop_front();
    return slots;
  }

  std::size_t size() const { return ring_.size(); }
  bool empty() const { return ring_.empty(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t total_inserted() const { return inserted_; }

  /// Absolute insertion index of the oldest transition still stored.
  std::uint64_t oldest_absolute() const { return inserted_ - ring_.size(); }

  const Transition& at_slot(std::size_t slot) const { return ring_[slot]; }
  std::size_t slot_of_absolute(std::uint64_t a) const { return static_cast<std::size_t>(a % capacity_); }

  // Episode view used by segment sampling.
  std::size_t episode_count() const { return spans_.size(); }
  std::size_t episode_length(std::size_t e) const { return spans_[e].length; }
  const Transition& step(std::size_t e, std::size_t i) const {
    return ring_[slot_of_absolute(spans_[e].first + i)];
  }
  std::uint64_t episode_id(std::size_t e) const { return spans_[e].id; }
  const std::deque<EpisodeSpan>& episodes() const { return spans_; }

 private:
  std::size_t capacity_;
  std::vector<Transition> ring_;
  std::deque<EpisodeSpan> spans_;
  std::uint64_t inserted_ = 0;
  std::uint64_t next_episode_id_ = 0;
};

}  // namespace diprl::data
