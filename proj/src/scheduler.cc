#include "flowbench/scheduler.h"

#include <cmath>

#include <fmt/format.h>

#include "flowbench/error.h"
#include "flowbench/sim.h"

namespace flowbench {

std::vector<TimedTarget> AlignChunkGlobal(const ActionChunk& chunk, const UavState& anchor) {
  if (chunk.targets.empty()) throw Error(ErrorCode::kEmptyChunk, "chunk has no targets");
  std::vector<TimedTarget> out;
  out.reserve(chunk.targets.size());
  for (std::size_t k = 0; k < chunk.targets.size(); ++k) {
    out.push_back({chunk.t_inf + static_cast<double>(k + 1) * chunk.step_dt,
                   BodyToWorld(anchor.pose, chunk.targets[k])});
  }
  return out;
}

TargetQueue PrunePassed(const std::vector<TimedTarget>& targets, double now, double delay) {
  TargetQueue q;
  const double cutoff = now + delay;
  for (const auto& t : targets) {
    if (t.eta > cutoff) q.targets.push_back(t);
  }
  if (q.targets.empty() && !targets.empty()) q.targets.push_back(targets.back());
  return q;
}

void CheckChunk(const ActionChunk& chunk) {
  if (chunk.targets.size() > kMaxChunkTargets) {
    throw Error(ErrorCode::kMalformedChunk,
                fmt::format("{} targets exceeds limit {}", chunk.targets.size(), kMaxChunkTargets));
  }
  auto finite_pose = [](const LocalPose& p) {
    return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z) && std::isfinite(p.roll) &&
           std::isfinite(p.pitch) && std::isfinite(p.yaw);
  };
  if (!std::isfinite(chunk.t_inf) || !std::isfinite(chunk.step_dt) || chunk.step_dt <= 0.0 ||
      !std::isfinite(chunk.anchor.t) || !finite_pose(chunk.anchor.pose)) {
    throw Error(ErrorCode::kMalformedChunk, "bad chunk header");
  }
  for (std::size_t i = 0; i < chunk.targets.size(); ++i) {
    if (!finite_pose(chunk.targets[i])) {
      throw Error(ErrorCode::kMalformedChunk, fmt::format("target {} is not finite", i));
    }
  }
}

}  // namespace flowbench
