#pragma once

#include <cstdint>

#include "diprl/env/chopgrid.hpp"

namespace diprl::data {

using env::Action;
using env::Observation;

enum class Source : std::uint8_t { demo, agent };

inline const char* to_string(Source s) { return s == Source::demo ? "demo" : "agent"; }

/// Counts reads of Transition::hidden_reward() on the current thread. The
/// learned-reward and SQIL paths must leave it untouched.
struct HiddenRewardProbe {
  static std::uint64_t& counter() {
    thread_local std::uint64_t reads = 0;
    return reads;
  }
  static std::uint64_t reads() { return counter(); }
  static void reset() { counter() = 0; }
};

/// One environment step. The source tag and the environment reward are fixed
/// at construction.
class Transition {
 public:
  Observation obs;
  Action action = Action::Forward;
  Observation next_obs;
  bool done = false;

  Transition() = default;
  Transition(Observation o, Action a, Observation next, bool d, double hidden_reward, Source src)
      : obs(std::move(o)), action(a), next_obs(std::move(next)), done(d), hidden_reward_(hidden_reward),
        source_(src) {}

  Source source() const { return source_; }

  double hidden_reward() const {
    ++HiddenRewardProbe::counter();
    return hidden_reward_;
  }

  bool operator==(const Transition& o) const {
    return obs == o.obs && action == o.action && next_obs == o.next_obs && done == o.done &&
           hidden_reward_ == o.hidden_reward_ && source_ == o.source_;
  }

 private:
  double hidden_reward_ = 0.0;
  Source source_ = Source::agent;
};

}  // namespace diprl::data
