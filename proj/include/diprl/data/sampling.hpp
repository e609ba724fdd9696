#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "diprl/data/demo_dataset.hpp"
#include "diprl/data/replay_buffer.hpp"

namespace diprl::data {

using Rng = std::mt19937_64;

/// Anything exposing episodes of transitions: DemoDataset or ReplayBuffer.
template <class T>
concept EpisodeSource = requires(const T& s, std::size_t e, std::size_t i) {
  { s.episode_count() } -> std::convertible_to<std::size_t>;
  { s.episode_length(e) } -> std::convertible_to<std::size_t>;
  { s.step(e, i) } -> std::convertible_to<const Transition&>;
};

struct SegmentStep {
  Observation obs;
  Action action;
  bool operator==(const SegmentStep&) const = default;
};

/// k consecutive (observation, action) pairs from one episode.
struct TrajectorySegment {
  std::vector<SegmentStep> steps;
  Source origin = Source::agent;
  std::uint64_t episode_id = 0;
  std::size_t offset = 0;

  std::size_t size() const { return steps.size(); }
  bool operator==(const TrajectorySegment&) const = default;
};

namespace detail {

inline std::uint64_t episode_id_of(const DemoDataset&, std::size_t e) { return e; }
inline std::uint64_t episode_id_of(const ReplayBuffer& b, std::size_t e) { return b.episode_id(e); }
inline Source origin_of(const DemoDataset&) { return Source::demo; }
inline Source origin_of(const ReplayBuffer&) { return Source::agent; }

}  // namespace detail

/// Draws a window of length k uniformly over all valid (episode, offset)
/// starts, i.e. episodes are weighted by their number of valid offsets.
template <EpisodeSource S>
TrajectorySegment sample_segment(const S& source, std::size_t k, Rng& rng) {
  if (k == 0) throw SamplingError("segment length must be positive");
  std::uint64_t total = 0;
  for (std::size_t e = 0; e < source.episode_count(); ++e) {
    const auto len = source.episode_length(e);
    if (len >= k) total += len - k + 1;
  }
  if (total == 0) throw SamplingError("no episode holds " + std::to_string(k) + " steps");
  auto pick = std::uniform_int_distribution<std::uint64_t>(0, total - 1)(rng);
  for (std::size_t e = 0; e < source.episode_count(); ++e) {
    const auto len = source.episode_length(e);
    if (len < k) continue;
    const auto starts = len - k + 1;
    if (pick >= starts) {
      pick -= starts;
      continue;
    }
    TrajectorySegment seg;
    seg.origin = detail::origin_of(source);
    seg.episode_id = detail::episode_id_of(source, e);
    seg.offset = static_cast<std::size_t>(pick);
    seg.steps.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
      const Transition& t = source.step(e, seg.offset + i);
      seg.steps.push_back({t.obs, t.action});
    }
    return seg;
  }
  throw SamplingError("segment sampling fell off the end");  // unreachable
}

/// Points at one transition: a flat demo index or a replay-buffer slot.
struct BatchRef {
  Source source;
  std::size_t index;
};

inline std::size_t demo_count_for(std::size_t batch_size, double demo_fraction) {
  return static_cast<std::size_t>(std::lround(demo_fraction * static_cast<double>(batch_size)));
}

/// Exactly round(demo_fraction * batch_size) demo references, the rest from
/// the buffer, each drawn uniformly with replacement, then shuffled.
inline std::vector<BatchRef> sample_mixed_refs(const ReplayBuffer& buffer, const DemoDataset& demos,
                                               std::size_t batch_size, double demo_fraction, Rng& rng) {
  if (!(demo_fraction >= 0.0 && demo_fraction <= 1.0)) throw SamplingError("demo_fraction outside [0, 1]");
  const auto n_demo = demo_count_for(batch_size, demo_fraction);
  const auto n_agent = batch_size - n_demo;
  if (n_demo > 0 && demos.empty()) throw SamplingError("mixed batch needs demonstrations but none are loaded");
  if (n_agent > 0 && buffer.empty()) throw SamplingError("mixed batch needs agent data but the buffer is empty");
  std::vector<BatchRef> refs;
  refs.reserve(batch_size);
  if (n_demo > 0) {
    std::uniform_int_distribution<std::size_t> d(0, demos.size() - 1);
    for (std::size_t i = 0; i < n_demo; ++i) refs.push_back({Source::demo, d(rng)});
  }
  if (n_agent > 0) {
    std::uniform_int_distribution<std::size_t> d(0, buffer.size() - 1);
    for (std::size_t i = 0; i < n_agent; ++i) refs.push_back({Source::agent, d(rng)});
  }
  std::shuffle(refs.begin(), refs.end(), rng);
  return refs;
}

inline const Transition& resolve(const BatchRef& r, const ReplayBuffer& buffer, const DemoDataset& demos) {
  return r.source == Source::demo ? demos[r.index] : buffer.at_slot(r.index);
}

inline std::vector<Transition> sample_mixed_batch(const ReplayBuffer& buffer, const DemoDataset& demos,
                                                  std::size_t batch_size, double demo_fraction, Rng& rng) {
  std::vector<Transition> batch;
  batch.reserve(batch_size);
  for (const auto& r : sample_mixed_refs(buffer, demos, batch_size, demo_fraction, rng))
    batch.push_back(resolve(r, buffer, demos));
  return batch;
}

}  // namespace diprl::data
