#include "flowbench/oracle.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "flowbench/error.h"

namespace flowbench {
namespace {

constexpr double kTieTolerance = 1e-9;
constexpr double kArrivalTolerance = 0.05;  // combined m + rad
constexpr int kHoverHoldSteps = 8;

// Appends poses so that consecutive entries differ by at most one step of
// travel and one step of turn.
class PathBuilder {
 public:
  PathBuilder(const LocalPose& start, double step_len, double step_turn)
      : step_len_(step_len), step_turn_(step_turn) {
    poses_.push_back(start);
  }

  const LocalPose& last() const { return poses_.back(); }

  void TurnBy(double angle) {
    const LocalPose from = last();
    const int n = Steps(std::abs(angle) / step_turn_);
    for (int k = 1; k <= n; ++k) {
      LocalPose p = from;
      p.yaw = WrapAngle(from.yaw + angle * k / n);
      poses_.push_back(p);
    }
  }

  void TurnTo(double yaw) { TurnBy(AngleDiff(last().yaw, yaw)); }

  // Straight segment; yaw slews toward `yaw` (if given) over the same steps.
  void MoveTo(double x, double y, double z, std::optional<double> yaw = std::nullopt) {
    const LocalPose from = last();
    const double dx = x - from.x, dy = y - from.y, dz = z - from.z;
    const double dyaw = yaw ? AngleDiff(from.yaw, *yaw) : 0.0;
    const int n = std::max(Steps(std::hypot(dx, dy, dz) / step_len_), Steps(std::abs(dyaw) / step_turn_));
    for (int k = 1; k <= n; ++k) {
      const double f = static_cast<double>(k) / n;
      LocalPose p = from;
      p.x = k == n ? x : from.x + f * dx;
      p.y = k == n ? y : from.y + f * dy;
      p.z = k == n ? z : from.z + f * dz;
      p.yaw = WrapAngle(from.yaw + f * dyaw);
      poses_.push_back(p);
    }
  }

  // Circular arc around (cx, cy) starting from the current position, facing
  // the center throughout. Negative sweep is clockwise seen from above.
  void Arc(double cx, double cy, double sweep) {
    const LocalPose from = last();
    const double radius = std::hypot(from.x - cx, from.y - cy);
    const double theta0 = std::atan2(from.y - cy, from.x - cx);
    const double per_step = std::min(step_len_ / radius, step_turn_);
    int n = Steps(std::abs(sweep) / per_step);
    n = (n + 3) / 4 * 4;  // quarter points land on samples
    for (int k = 1; k <= n; ++k) {
      const double theta = theta0 + sweep * k / n;
      LocalPose p = from;
      p.x = cx + radius * std::cos(theta);
      p.y = cy + radius * std::sin(theta);
      p.yaw = WrapAngle(theta + kPi);
      poses_.push_back(p);
    }
  }

  void Hold(int n) {
    for (int k = 0; k < n; ++k) poses_.push_back(last());
  }

  std::vector<LocalPose> Take() { return std::move(poses_); }

 private:
  static int Steps(double ratio) {
    if (ratio <= 1e-12) return 0;
    return static_cast<int>(std::ceil(ratio - 1e-9));
  }

  double step_len_;
  double step_turn_;
  std::vector<LocalPose> poses_;
};

double PoseDistance(const LocalPose& a, const LocalPose& b) {
  return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z) + std::abs(AngleDiff(a.yaw, b.yaw));
}

double FacingYaw(const LocalPose& from, double tx, double ty) { return std::atan2(ty - from.y, tx - from.x); }

}  // namespace

double OrbitRadius(const Instruction& task, const SceneObject& target) {
  return task.params.distance.value_or(2.0 * target.radius);
}

OraclePlan BuildOraclePlan(const Instruction& task, const ScenarioSpec& spec, const LocalPose& start,
                           const SimConfig& cfg) {
  const auto violations = CheckInstruction(task);
  if (!violations.empty()) throw Error(ErrorCode::kUnsupportedTask, violations.front().message);
  const double frac = cfg.plan_speed_fraction;
  PathBuilder b(start, cfg.v_max * frac * cfg.step_dt, cfg.omega_max * frac * cfg.step_dt);
  const auto& p = task.params;
  const double side_sign = p.side.value_or(Side::kLeft) == Side::kLeft ? 1.0 : -1.0;

  switch (task.task_type) {
    case TaskType::kTakeoff:
      b.MoveTo(start.x, start.y, start.z + *p.distance);
      break;
    case TaskType::kTranslate: {
      const double heading = start.yaw + *p.angle;
      b.MoveTo(start.x + *p.distance * std::cos(heading), start.y + *p.distance * std::sin(heading), start.z);
      break;
    }
    case TaskType::kRotate:
      b.TurnBy(*p.angle);
      break;
    case TaskType::kDive:
      b.MoveTo(start.x + *p.distance * std::cos(start.yaw), start.y + *p.distance * std::sin(start.yaw),
               start.z - *p.distance);
      break;
    case TaskType::kApproach: {
      const SceneObject& o = RequireObject(spec, p.target);
      const double dx = start.x - o.position[0], dy = start.y - o.position[1];
      const double range = std::hypot(dx, dy);
      const double standoff = cfg.standoff_factor * o.radius;
      b.TurnTo(FacingYaw(start, o.position[0], o.position[1]));
      if (range > standoff) {
        b.MoveTo(o.position[0] + dx / range * standoff, o.position[1] + dy / range * standoff, start.z);
      }
      break;
    }
    case TaskType::kOrbit: {
      const SceneObject& o = RequireObject(spec, p.target);
      const double cx = o.position[0], cy = o.position[1];
      const double radius = OrbitRadius(task, o);
      double dx = start.x - cx, dy = start.y - cy;
      double range = std::hypot(dx, dy);
      if (range < 1e-9) {
        dx = -std::cos(start.yaw);
        dy = -std::sin(start.yaw);
        range = 1.0;
      }
      if (std::abs(range - radius) > 1e-9) {
        const double ex = cx + dx / range * radius, ey = cy + dy / range * radius;
        b.MoveTo(ex, ey, start.z, std::atan2(cy - ey, cx - ex));
      }
      b.TurnTo(FacingYaw(b.last(), cx, cy));
      // Left keeps the center on the right-hand turn: clockwise from above.
      b.Arc(cx, cy, -side_sign * 2.0 * kPi);
      break;
    }
    case TaskType::kPassSide:
    case TaskType::kHoverBeside: {
      const SceneObject& o = RequireObject(spec, p.target);
      double ux = o.position[0] - start.x, uy = o.position[1] - start.y;
      const double range = std::hypot(ux, uy);
      if (range < 1e-9) throw Error(ErrorCode::kUnresolvedTarget, "UAV is above the target object");
      ux /= range;
      uy /= range;
      const double nx = -uy, ny = ux;
      const double offset = side_sign * cfg.clearance_factor * o.radius;
      if (task.task_type == TaskType::kPassSide) {
        b.MoveTo(start.x + offset * nx, start.y + offset * ny, start.z);
        b.MoveTo(o.position[0] + offset * nx + 2.0 * o.radius * ux,
                 o.position[1] + offset * ny + 2.0 * o.radius * uy, start.z);
      } else {
        b.MoveTo(o.position[0] + offset * nx, o.position[1] + offset * ny, start.z);
        b.Hold(kHoverHoldSteps);
      }
      break;
    }
    case TaskType::kFlyBetween: {
      const SceneObject& a = RequireObject(spec, p.target);
      const SceneObject& c = RequireObject(spec, p.target2);
      const double mx = 0.5 * (a.position[0] + c.position[0]);
      const double my = 0.5 * (a.position[1] + c.position[1]);
      double gx = c.position[0] - a.position[0], gy = c.position[1] - a.position[1];
      const double gap = std::hypot(gx, gy);
      if (gap < 1e-9) throw Error(ErrorCode::kUnresolvedTarget, "the two objects coincide");
      gx /= gap;
      gy /= gap;
      double dx = -gy, dy = gx;
      if ((mx - start.x) * dx + (my - start.y) * dy < 0) {
        dx = -dx;
        dy = -dy;
      }
      const double along = (start.x - mx) * dx + (start.y - my) * dy;
      const double beyond = 2.0 * std::max(a.radius, c.radius) + 1.0;
      b.TurnTo(std::atan2(dy, dx));
      b.MoveTo(mx + along * dx, my + along * dy, start.z);
      b.MoveTo(mx + beyond * dx, my + beyond * dy, start.z);
      break;
    }
    case TaskType::kFaceTarget: {
      const SceneObject& o = RequireObject(spec, p.target);
      b.TurnTo(FacingYaw(start, o.position[0], o.position[1]));
      break;
    }
  }
  return OraclePlan{b.Take()};
}

OraclePolicy::OraclePolicy(Instruction task, ScenarioSpec spec, SimConfig cfg)
    : task_(std::move(task)), spec_(std::move(spec)), cfg_(cfg) {
  if (cfg_.chunk_size < 1 || cfg_.chunk_size > kMaxChunkTargets) {
    throw Error(ErrorCode::kMalformedChunk, fmt::format("chunk size {} outside [1, 64]", cfg_.chunk_size));
  }
}

ActionChunk OraclePolicy::NextChunk(const UavState& state) {
  if (!planned_) {
    plan_ = BuildOraclePlan(task_, spec_, state.pose, cfg_);
    planned_ = true;
    progress_ = 0;
    progress_time_ = state.t;
  } else {
    // Locate the UAV along the plan, never moving backwards. Equidistant
    // candidates (holds) resolve toward the index elapsed time suggests.
    const double elapsed = (state.t - progress_time_) / cfg_.step_dt;
    const double expected = static_cast<double>(progress_) + std::max(0.0, std::round(elapsed));
    const std::size_t last = plan_.poses.size() - 1;
    const std::size_t window_end = std::min(last, progress_ + 3 * cfg_.chunk_size);
    std::size_t best = progress_;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = progress_; i <= window_end; ++i) {
      const double d = PoseDistance(state.pose, plan_.poses[i]);
      if (d < best_d - kTieTolerance) {
        best = i;
        best_d = d;
      } else if (d <= best_d + kTieTolerance &&
                 std::abs(static_cast<double>(i) - expected) < std::abs(static_cast<double>(best) - expected)) {
        best = i;
      }
    }
    progress_ = best;
    progress_time_ = state.t;
  }

  ActionChunk chunk;
  chunk.t_inf = state.t;
  chunk.anchor = state;
  chunk.step_dt = cfg_.step_dt;
  const auto& poses = plan_.poses;
  const std::size_t last = poses.size() - 1;
  if (progress_ >= last) {
    if (PoseDistance(state.pose, poses[last]) <= kArrivalTolerance) return chunk;
    chunk.targets.push_back(WorldToBody(state.pose, poses[last]));
    return chunk;
  }
  const std::size_t end = std::min(last, progress_ + cfg_.chunk_size);
  for (std::size_t i = progress_ + 1; i <= end; ++i) {
    chunk.targets.push_back(WorldToBody(state.pose, poses[i]));
  }
  return chunk;
}

Episode GenerateEpisode(const Instruction& task, const ScenarioSpec& spec, const std::string& id,
                        const SimConfig& cfg) {
  World w = MakeWorld(spec);
  OraclePolicy oracle(task, spec, cfg);
  const LocalPose start = w.uav.pose;
  Episode e;
  e.id = id;
  e.instruction = task;
  e.source = EpisodeSource::kSimRuleBased;
  e.frames.push_back(Frame{0.0, LocalPose{}, fmt::format("sim/{}/{:04d}", id, 0)});
  for (int k = 1;; ++k) {
    const ActionChunk chunk = oracle.NextChunk(w.uav);
    if (chunk.targets.empty()) break;
    if (w.clock >= cfg.timeout - 1e-9) {
      throw Error(ErrorCode::kTimeout, fmt::format("episode '{}' did not finish within {} s", id, cfg.timeout));
    }
    const LocalPose target = BodyToWorld(chunk.anchor.pose, chunk.targets.front());
    w = Step(w, ControlCommand{target, ControlMode::kGoTo}, cfg.step_dt, cfg);
    e.frames.push_back(Frame{k * cfg.step_dt, RelativeToStart(start, w.uav.pose),
                             fmt::format("sim/{}/{:04d}", id, k)});
  }
  return e;
}

}  // namespace flowbench
