#pragma once

#include <span>
#include <vector>

#include "diprl/data/transition.hpp"

namespace diprl::data {

/// Demonstration transitions stored flat, episode by episode.
class DemoDataset {
 public:
  void add_episode(std::vector<Transition> episode) {
    if (episode.empty()) throw ContractError("demos: empty episode");
    for (const auto& t : episode)
      if (t.source() != Source::demo) throw ContractError("demos: agent transition in demonstration episode");
    starts_.push_back(transitions_.size());
    for (auto& t : episode) transitions_.push_back(std::move(t));
  }

  std::size_t size() const { return transitions_.size(); }  // M
  bool empty() const { return transitions_.empty(); }
  std::size_t episode_count() const { return starts_.size(); }

  std::size_t episode_length(std::size_t e) const {
    const auto end = e + 1 < starts_.size() ? starts_[e + 1] : transitions_.size();
    return end - starts_[e];
  }
  std::span<const Transition> episode(std::size_t e) const {
    return {transitions_.data() + starts_[e], episode_length(e)};
  }
  const Transition& step(std::size_t e, std::size_t i) const { return transitions_[starts_[e] + i]; }
  std::size_t episode_start(std::size_t e) const { return starts_[e]; }

  const Transition& operator[](std::size_t flat) const { return transitions_[flat]; }
  const std::vector<Transition>& transitions() const { return transitions_; }

  bool operator==(const DemoDataset&) const = default;

 private:
  std::vector<Transition> transitions_;
  std::vector<std::size_t> starts_;
};

}  // namespace diprl::data
