#include "flowbench/scheme.h"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "flowbench/error.h"

namespace flowbench {
namespace {

constexpr double kTimeEps = 1e-9;

std::string_view DirectionName(Direction d) {
  switch (d) {
    case Direction::kUp: return "up";
    case Direction::kDown: return "down";
    case Direction::kLocal: return "tick";
  }
  return "?";
}

ActionChunk CallPolicy(Policy& policy, const UavState& state, const Observation& obs, const Instruction& task) {
  try {
    return policy.Decide(state, obs, task);
  } catch (const Error& e) {
    throw Error(ErrorCode::kPolicyError, e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kPolicyError, e.what());
  }
}

}  // namespace

std::string_view SchemeName(Scheme s) {
  switch (s) {
    case Scheme::kStopAndInfer: return "StopAndInfer";
    case Scheme::kContinuous: return "Continuous";
    case Scheme::kGloballyAligned: return "GloballyAligned";
  }
  return "?";
}

std::optional<Scheme> ParseScheme(std::string_view name) {
  if (name == "stop" || name == "StopAndInfer") return Scheme::kStopAndInfer;
  if (name == "cont" || name == "Continuous") return Scheme::kContinuous;
  if (name == "global" || name == "GloballyAligned") return Scheme::kGloballyAligned;
  return std::nullopt;
}

void ValidateSchemeConfig(const SchemeConfig& cfg) {
  if (!(cfg.step_dt > 0.0 && cfg.step_dt <= 0.5)) {
    throw Error(ErrorCode::kInvalidDt, fmt::format("step_dt {} outside (0, 0.5]", cfg.step_dt));
  }
  if (!(cfg.chunk_period >= cfg.step_dt - kTimeEps)) {
    throw Error(ErrorCode::kConfigError,
                fmt::format("chunk_period {} is shorter than step_dt {}", cfg.chunk_period, cfg.step_dt));
  }
}

std::string FormatTranscript(const Transcript& transcript) {
  std::string out;
  for (const auto& e : transcript) {
    out += fmt::format("{:.6f}\t{}\t", e.t, DirectionName(e.dir));
    if (e.message) out += DescribeMessage(*e.message);
    if (e.tick) {
      const auto& r = *e.tick;
      const auto& p = r.target;
      out += fmt::format("{} gen={} queued={} target={:.6f},{:.6f},{:.6f},{:.6f}",
                         r.mode == ControlMode::kGoTo ? "GoTo" : "PositionHold", r.generation, r.queued, p.x, p.y,
                         p.z, p.yaw);
    }
    out += '\n';
  }
  return out;
}

SchemeController::SchemeController(SchemeConfig cfg) : cfg_(cfg) { ValidateSchemeConfig(cfg_); }

void SchemeController::Start(double) {
  queue_.targets.clear();
  in_flight_ = false;
  held_request_ = false;
  last_request_.reset();
}

bool SchemeController::WantsInference(double now) const {
  if (in_flight_) return false;
  if (cfg_.scheme == Scheme::kStopAndInfer) {
    const auto& q = queue_.targets;
    return q.empty() || (q.size() == 1 && q.front().eta <= now + kTimeEps);
  }
  return !last_request_ || now >= *last_request_ + cfg_.chunk_period - kTimeEps;
}

void SchemeController::OnRequest(double now) {
  in_flight_ = true;
  held_request_ = queue_.targets.empty();
  last_request_ = now;
}

bool SchemeController::Apply(const ActionChunk& chunk, double now, double delay, const UavState& current) {
  in_flight_ = false;
  CheckChunk(chunk);
  if (chunk.targets.empty()) return false;
  TargetQueue next;
  switch (cfg_.scheme) {
    case Scheme::kContinuous:
      for (std::size_t k = 0; k < chunk.targets.size(); ++k) {
        next.targets.push_back({now + static_cast<double>(k + 1) * chunk.step_dt,
                                BodyToWorld(current.pose, chunk.targets[k])});
      }
      break;
    case Scheme::kGloballyAligned:
      if (!held_request_) {
        next = PrunePassed(AlignChunkGlobal(chunk, chunk.anchor), chunk.t_inf, delay);
        break;
      }
      [[fallthrough]];
    case Scheme::kStopAndInfer:
      next.targets = AlignChunkGlobal(chunk, chunk.anchor);
      for (std::size_t k = 0; k < next.targets.size(); ++k) {
        next.targets[k].eta = now + static_cast<double>(k + 1) * chunk.step_dt;
      }
      break;
  }
  next.generation = next_generation_++;
  queue_ = std::move(next);
  return true;
}

ControlCommand SchemeController::Command(double now, const UavState& current, TickRecord* record) {
  auto& q = queue_.targets;
  std::size_t drop = 0;
  while (drop + 1 < q.size() && q[drop].eta <= now + kTimeEps) ++drop;
  q.erase(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(drop));
  if (cfg_.scheme == Scheme::kStopAndInfer && q.size() == 1 && q.front().eta <= now + kTimeEps) q.clear();

  ControlCommand cmd{current.pose, ControlMode::kPositionHold};
  if (!q.empty()) cmd = ControlCommand{q.front().pose, ControlMode::kGoTo};
  if (record) {
    *record = TickRecord{now, cmd.mode, cmd.target, queue_.generation, q.empty() ? 0 : q.size() - 1};
  }
  return cmd;
}

void SchemeController::Abort() {
  queue_.targets.clear();
  held_request_ = false;
  in_flight_ = false;
}

SchemeRun RunScheme(const SchemeConfig& cfg, const LatencyModel& lat, Policy& policy, World world,
                    const Instruction& task, double timeout, const SimConfig& sim) {
  ValidateLatency(lat);
  SchemeController ctl(cfg);
  std::mt19937_64 rng(cfg.seed);
  const double t0 = world.clock;
  world.uav.t = t0;
  ctl.Start(t0);
  policy.Reset();

  struct Pending {
    ActionChunk chunk;
    double arrival;
    double delay;
  };
  std::optional<Pending> pending;

  SchemeRun run;
  auto log = [&](double t, Direction d, BridgeMessage m) {
    run.transcript.push_back(TranscriptEntry{t, d, std::move(m), std::nullopt});
  };
  const std::string id = fmt::format("run-{}", cfg.seed);
  log(t0, Direction::kDown, InstructionStartMsg{id, task.text});
  run.trajectory.push_back(world.uav.pose);

  auto deliver = [&](double now) {
    log(pending->arrival, Direction::kDown, ChunkCmdMsg{pending->chunk});
    const bool active = ctl.Apply(pending->chunk, now, pending->delay, world.uav);
    pending.reset();
    return active;
  };

  for (std::uint64_t k = 0;; ++k) {
    const double now = world.clock;
    if (pending && pending->arrival <= now + kTimeEps && !deliver(now)) break;
    if (now - t0 >= timeout - kTimeEps) {
      run.duration = now - t0;
      throw SchemeTimeout(fmt::format("'{}' not complete after {} s", task.text, timeout), std::move(run));
    }
    log(now, Direction::kUp, TelemetryMsg{now, world.uav});
    log(now, Direction::kUp, FrameMetaMsg{now, fmt::format("sim/tick/{:05d}", k)});

    if (ctl.WantsInference(now)) {
      const Observation obs = Observe(world, sim);
      log(now, Direction::kUp, RemoteQueryMsg{now, world.uav, obs, task.text});
      ctl.OnRequest(now);
      ActionChunk chunk = CallPolicy(policy, world.uav, obs, task);
      const double delay = lat.SampleInference(rng) + lat.uplink + lat.downlink;
      pending = Pending{std::move(chunk), now + delay, delay};
      if (pending->arrival <= now + kTimeEps && !deliver(now)) break;
    }

    TickRecord rec;
    const ControlCommand cmd = ctl.Command(now, world.uav, &rec);
    run.transcript.push_back(TranscriptEntry{now, Direction::kLocal, std::nullopt, rec});
    world = Step(world, cmd, cfg.step_dt, sim);
    run.trajectory.push_back(world.uav.pose);
  }
  run.duration = world.clock - t0;
  log(world.clock, Direction::kDown, AckMsg{fmt::format("complete:{}", id)});
  return run;
}

}  // namespace flowbench
