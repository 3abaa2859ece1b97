#ifndef FLOWBENCH_SCHEDULER_H_
#define FLOWBENCH_SCHEDULER_H_

#include <cstdint>
#include <vector>

#include "flowbench/datamodel.h"
#include "flowbench/geo.h"

namespace flowbench {

struct TimedTarget {
  double eta = 0.0;
  LocalPose pose;  // world frame

  bool operator==(const TimedTarget&) const = default;
};

struct TargetQueue {
  std::vector<TimedTarget> targets;  // strictly increasing eta
  std::uint64_t generation = 0;

  bool operator==(const TargetQueue&) const = default;
};

// Fuses body-frame chunk targets with `anchor`: eta_k = t_inf + k * step_dt
// (k from 1). Throws kEmptyChunk for a chunk without targets.
std::vector<TimedTarget> AlignChunkGlobal(const ActionChunk& chunk, const UavState& anchor);

// Drops every target with eta <= now + delay. If that would empty the list,
// the final target is kept. Generation is left at 0 for the caller to set.
TargetQueue PrunePassed(const std::vector<TimedTarget>& targets, double now, double delay);

// Throws kMalformedChunk if the chunk exceeds kMaxChunkTargets or carries
// non-finite values.
void CheckChunk(const ActionChunk& chunk);

}  // namespace flowbench

#endif  // FLOWBENCH_SCHEDULER_H_
