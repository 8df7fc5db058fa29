#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "statefarm/channel.hpp"

namespace statefarm {

/// Stream item index assigned by the emitter, contiguous from 0.
using Seq = std::uint64_t;

/// Invalid configuration, pattern/config mismatch, or a misuse of a farm handle.
class FarmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Scheduling { RoundRobin, OnDemand, KeyDirected };

inline std::string_view to_string(Scheduling s) {
  switch (s) {
    case Scheduling::RoundRobin:
      return "round-robin";
    case Scheduling::OnDemand:
      return "on-demand";
    case Scheduling::KeyDirected:
      return "key-directed";
  }
  return "?";
}

struct FarmConfig {
  std::size_t n_workers = 1;
  std::size_t queue_capacity = kDefaultQueueCapacity;
  Scheduling scheduling = Scheduling::RoundRobin;
  bool collector_enabled = true;
  bool feedback_enabled = false;
  bool preserve_order = false;
  // Successive approximation: start grown workers from the initial state
  // instead of the latest global value seen on the feedback path.
  bool grow_from_initial_state = false;
  // Best effort: bind activity k to core k % hardware threads.
  bool pin_threads = false;

  void validate() const {
    if (n_workers < 1) throw FarmError("farm needs at least one worker");
    if (queue_capacity < 1) throw FarmError("queue capacity must be at least 1");
    if (feedback_enabled && !collector_enabled)
      throw FarmError("feedback channel requires the collector");
    if (preserve_order && !collector_enabled)
      throw FarmError("order preservation requires the collector");
  }
};

}  // namespace statefarm
