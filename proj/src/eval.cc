#include "flowbench/eval.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "flowbench/error.h"
#include "flowbench/oracle.h"

namespace flowbench {
namespace {

double Distance6(const Vec6& a, const Vec6& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < 6; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::vector<Vec6> Embed(const Trajectory& t) {
  std::vector<Vec6> out;
  out.reserve(t.size());
  for (const auto& p : t) out.push_back(PoseToVec6(p));
  return out;
}

double HorizontalRange(const LocalPose& p, const SceneObject& o) {
  return std::hypot(o.position[0] - p.x, o.position[1] - p.y);
}

std::string Deg(double rad) { return fmt::format("{:.0f}°", RadToDeg(rad)); }

std::size_t WindowTicks(const SuccessRule& rule) {
  return static_cast<std::size_t>(std::llround(rule.final_window / rule.step_dt));
}

// Unit horizontal direction from the start pose toward the object and its
// left normal.
struct Frame2 {
  double ux, uy, nx, ny;
};
Frame2 ApproachFrame(const LocalPose& start, const SceneObject& o) {
  double ux = o.position[0] - start.x, uy = o.position[1] - start.y;
  const double r = std::hypot(ux, uy);
  if (r < 1e-9) {
    ux = std::cos(start.yaw);
    uy = std::sin(start.yaw);
  } else {
    ux /= r;
    uy /= r;
  }
  return {ux, uy, -uy, ux};
}

void CheckLateral(double lat, double side_sign, const SuccessRule& rule, SuccessResult& r) {
  if (lat * side_sign <= 0.0) {
    r.notes.push_back(fmt::format("lateral offset {:.2f} m on the wrong side", lat));
    r.success = false;
  }
  if (std::abs(lat) < rule.lateral_lo || std::abs(lat) > rule.lateral_hi) {
    r.notes.push_back(
        fmt::format("lateral offset {:.2f} m outside [{}, {}] m", std::abs(lat), rule.lateral_lo, rule.lateral_hi));
    r.success = false;
  }
}

}  // namespace

double Dtw(const std::vector<Vec6>& a, const std::vector<Vec6>& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::kEmptyTrajectory, "dtw needs non-empty sequences");
  const std::size_t n = a.size(), m = b.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= m; ++j) {
      cur[j] = Distance6(a[i - 1], b[j - 1]) + std::min({prev[j], cur[j - 1], prev[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double NdtwFromCost(double cost, std::size_t ref_len, double d_th) {
  return std::exp(-cost / (static_cast<double>(ref_len) * d_th));
}

double Ndtw(const Trajectory& pred, const Trajectory& ref, double d_th) {
  if (pred.empty() || ref.empty()) throw Error(ErrorCode::kEmptyTrajectory, "ndtw needs non-empty trajectories");
  if (!(d_th > 0.0)) throw Error(ErrorCode::kOutOfRange, "d_th must be positive");
  return NdtwFromCost(Dtw(Embed(pred), Embed(ref)), ref.size(), d_th);
}

SuccessResult CheckSuccess(const Trajectory& traj, const Instruction& task, const ScenarioSpec& spec,
                           const SuccessRule& rule) {
  if (traj.empty()) throw Error(ErrorCode::kEmptyTrajectory, "no trajectory to check");
  SuccessResult r{true, {}};
  auto fail = [&](std::string note) {
    r.success = false;
    r.notes.push_back(std::move(note));
  };
  const auto& p = task.params;
  const LocalPose& s = traj.front();
  const LocalPose& e = traj.back();
  const double side_sign = p.side.value_or(Side::kLeft) == Side::kLeft ? 1.0 : -1.0;

  switch (task.task_type) {
    case TaskType::kTakeoff:
    case TaskType::kDive: {
      const double want = task.task_type == TaskType::kTakeoff ? *p.distance : -*p.distance;
      const double dz = e.z - s.z;
      if (std::abs(dz - want) > rule.distance_tolerance * std::abs(want)) {
        fail(fmt::format("altitude change {:.2f} m vs {:.2f} m", dz, want));
      }
      break;
    }
    case TaskType::kTranslate: {
      const double dx = e.x - s.x, dy = e.y - s.y;
      const double d = std::hypot(dx, dy);
      if (std::abs(d - *p.distance) > rule.distance_tolerance * *p.distance) {
        fail(fmt::format("displacement {:.2f} m vs {:.2f} m", d, *p.distance));
      }
      if (d > 1e-9) {
        const double err = AngleDiff(std::atan2(dy, dx), s.yaw + *p.angle);
        if (std::abs(err) > rule.heading_tolerance) fail(fmt::format("heading off by {}", Deg(std::abs(err))));
      }
      break;
    }
    case TaskType::kRotate: {
      double net = 0.0;
      for (std::size_t i = 1; i < traj.size(); ++i) net += AngleDiff(traj[i - 1].yaw, traj[i].yaw);
      if (std::abs(net - *p.angle) > rule.rotate_tolerance) {
        fail(fmt::format("net yaw {} vs {}", Deg(net), Deg(*p.angle)));
      }
      const double disp = std::hypot(e.x - s.x, e.y - s.y, e.z - s.z);
      if (disp >= rule.rotate_max_displacement) fail(fmt::format("displacement {:.2f} m during rotation", disp));
      break;
    }
    case TaskType::kApproach: {
      const SceneObject& o = RequireObject(spec, p.target);
      const double standoff = rule.standoff_factor * o.radius;
      const double final_range = HorizontalRange(e, o);
      if (final_range < rule.approach_lo * standoff || final_range > rule.approach_hi * standoff) {
        fail(fmt::format("final range {:.2f} m outside [{:.2f}, {:.2f}] m", final_range, rule.approach_lo * standoff,
                         rule.approach_hi * standoff));
      }
      if (final_range >= HorizontalRange(s, o)) fail("range did not decrease");
      const std::size_t w = std::min(WindowTicks(rule), traj.size() - 1);
      for (std::size_t i = traj.size() - w; i < traj.size(); ++i) {
        if (HorizontalRange(traj[i], o) > HorizontalRange(traj[i - 1], o) + 1e-6) {
          fail("range increased during the final second");
          break;
        }
      }
      break;
    }
    case TaskType::kOrbit: {
      const SceneObject& o = RequireObject(spec, p.target);
      const double radius = OrbitRadius(task, o);
      const double band = rule.orbit_radial_tolerance * radius;
      std::size_t first = traj.size();
      for (std::size_t i = 0; i < traj.size(); ++i) {
        if (std::abs(HorizontalRange(traj[i], o) - radius) <= band) {
          first = i;
          break;
        }
      }
      double sweep = 0.0;
      double worst = 0.0;
      for (std::size_t i = first; i < traj.size(); ++i) {
        worst = std::max(worst, std::abs(HorizontalRange(traj[i], o) - radius));
        if (i > first) {
          const double a0 = std::atan2(traj[i - 1].y - o.position[1], traj[i - 1].x - o.position[0]);
          const double a1 = std::atan2(traj[i].y - o.position[1], traj[i].x - o.position[0]);
          sweep += AngleDiff(a0, a1);
        }
      }
      if (std::abs(sweep) < rule.orbit_min_sweep) {
        fail(fmt::format("sweep {} < {}", Deg(std::abs(sweep)), Deg(rule.orbit_min_sweep)));
      } else if (p.side && sweep * -side_sign < 0.0) {
        fail(fmt::format("sweep direction {} opposite to command", sweep > 0 ? "counterclockwise" : "clockwise"));
      }
      if (first < traj.size() && worst > band) {
        fail(fmt::format("radial deviation {:.0f}% > {:.0f}%", 100.0 * worst / radius,
                         100.0 * rule.orbit_radial_tolerance));
      }
      break;
    }
    case TaskType::kPassSide: {
      const SceneObject& o = RequireObject(spec, p.target);
      const Frame2 f = ApproachFrame(s, o);
      auto along = [&](const LocalPose& q) { return (q.x - o.position[0]) * f.ux + (q.y - o.position[1]) * f.uy; };
      auto lateral = [&](const LocalPose& q) { return (q.x - o.position[0]) * f.nx + (q.y - o.position[1]) * f.ny; };
      std::optional<double> lat;
      for (std::size_t i = 1; i < traj.size() && !lat; ++i) {
        const double a0 = along(traj[i - 1]), a1 = along(traj[i]);
        if (a0 < 0.0 && a1 >= 0.0) {
          const double t = a0 == a1 ? 1.0 : -a0 / (a1 - a0);
          lat = lateral(traj[i - 1]) + t * (lateral(traj[i]) - lateral(traj[i - 1]));
        }
      }
      if (!lat) {
        fail("never crossed the object's lateral plane");
      } else {
        CheckLateral(*lat, side_sign, rule, r);
      }
      break;
    }
    case TaskType::kFlyBetween: {
      const SceneObject& a = RequireObject(spec, p.target);
      const SceneObject& b = RequireObject(spec, p.target2);
      const double mx = 0.5 * (a.position[0] + b.position[0]), my = 0.5 * (a.position[1] + b.position[1]);
      double gx = b.position[0] - a.position[0], gy = b.position[1] - a.position[1];
      const double gap = std::hypot(gx, gy);
      gx /= gap;
      gy /= gap;
      // Signed distance to the line through A and B, and position along it.
      auto across = [&](const LocalPose& q) { return (q.x - mx) * -gy + (q.y - my) * gx; };
      auto along = [&](const LocalPose& q) { return (q.x - mx) * gx + (q.y - my) * gy; };
      std::optional<double> best;
      for (std::size_t i = 1; i < traj.size(); ++i) {
        const double c0 = across(traj[i - 1]), c1 = across(traj[i]);
        if ((c0 < 0.0 && c1 >= 0.0) || (c0 > 0.0 && c1 <= 0.0)) {
          const double t = -c0 / (c1 - c0);
          const double at = along(traj[i - 1]) + t * (along(traj[i]) - along(traj[i - 1]));
          if (!best || std::abs(at) < std::abs(*best)) best = at;
        }
      }
      if (!best) {
        fail("never crossed the line between the objects");
      } else if (std::abs(*best) > rule.midline_tolerance) {
        fail(fmt::format("crossed {:.2f} m from the midpoint", std::abs(*best)));
      }
      break;
    }
    case TaskType::kHoverBeside: {
      const SceneObject& o = RequireObject(spec, p.target);
      const Frame2 f = ApproachFrame(s, o);
      const std::size_t w = std::min(WindowTicks(rule), traj.size() - 1);
      const LocalPose& before = traj[traj.size() - 1 - w];
      const double drift = std::hypot(e.x - before.x, e.y - before.y, e.z - before.z);
      if (w == 0 || drift >= rule.hover_max_drift) fail(fmt::format("moved {:.2f} m during the final second", drift));
      const double lat = (e.x - o.position[0]) * f.nx + (e.y - o.position[1]) * f.ny;
      const double fwd = (e.x - o.position[0]) * f.ux + (e.y - o.position[1]) * f.uy;
      CheckLateral(lat, side_sign, rule, r);
      if (std::abs(fwd) > std::max(1.0, o.radius)) fail(fmt::format("{:.2f} m ahead/behind the object", fwd));
      break;
    }
    case TaskType::kFaceTarget: {
      const SceneObject& o = RequireObject(spec, p.target);
      const double bearing = AngleDiff(std::atan2(o.position[1] - e.y, o.position[0] - e.x), e.yaw);
      if (std::abs(bearing) > rule.face_tolerance) fail(fmt::format("final bearing {}", Deg(std::abs(bearing))));
      break;
    }
  }
  return r;
}

EvalResult EvaluateCase(const EvalCase& c, Policy& policy, const SuiteOptions& opt) {
  EvalResult out;
  out.episode_id = c.reference.id;
  out.task_type = c.reference.instruction.task_type;
  auto score = [&](const SchemeRun& run) {
    Trajectory rel;
    rel.reserve(run.trajectory.size());
    for (const auto& q : run.trajectory) rel.push_back(RelativeToStart(run.trajectory.front(), q));
    Trajectory ref;
    ref.reserve(c.reference.frames.size());
    for (const auto& f : c.reference.frames) ref.push_back(f.pose);
    out.dtw_cost = Dtw(Embed(rel), Embed(ref));
    out.ndtw = NdtwFromCost(out.dtw_cost, ref.size(), opt.d_th);
    out.ticks = run.trajectory.size();
  };
  try {
    const SchemeRun run = RunScheme(opt.scheme, opt.latency, policy, MakeWorld(c.scenario), c.reference.instruction,
                                    opt.timeout, opt.sim);
    score(run);
    const SuccessResult s = CheckSuccess(run.trajectory, c.reference.instruction, c.scenario, opt.rule);
    out.success = s.success;
    out.notes = s.notes;
  } catch (const SchemeTimeout& e) {
    score(e.run());
    out.success = false;
    out.notes.push_back(e.what());
  } catch (const Error& e) {
    out.success = false;
    out.ndtw = 0.0;
    out.notes.push_back(e.what());
  }
  return out;
}

SuiteReport EvaluateSuite(const std::vector<EvalCase>& cases, const PolicyMaker& make, const SuiteOptions& opt) {
  SuiteReport report;
  report.results.resize(cases.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) {
      try {
        auto policy = make(cases[i]);
        report.results[i] = EvaluateCase(cases[i], *policy, opt);
      } catch (const std::exception& e) {
        EvalResult failed;
        failed.episode_id = cases[i].reference.id;
        failed.task_type = cases[i].reference.instruction.task_type;
        report.results[i] = std::move(failed);
        report.results[i].notes.push_back(e.what());
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(opt.workers, static_cast<unsigned>(cases.size())));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::sort(report.results.begin(), report.results.end(),
            [](const EvalResult& a, const EvalResult& b) { return a.episode_id < b.episode_id; });

  auto add = [](TaskSummary& s, const EvalResult& r) {
    ++s.episodes;
    s.successes += r.success ? 1 : 0;
    s.mean_ndtw += r.ndtw;
  };
  for (const auto& r : report.results) {
    add(report.per_task[r.task_type], r);
    add(report.overall, r);
  }
  auto finish = [](TaskSummary& s) {
    if (s.episodes == 0) return;
    s.sr = static_cast<double>(s.successes) / static_cast<double>(s.episodes);
    s.mean_ndtw /= static_cast<double>(s.episodes);
  };
  for (auto& [_, s] : report.per_task) finish(s);
  finish(report.overall);
  return report;
}

std::string SuiteTable(const SuiteReport& r) {
  std::string out = "task_type\tSR\tmean_NDTW\tepisodes\n";
  for (const auto& [type, s] : r.per_task) {
    out += fmt::format("{}\t{:.4f}\t{:.4f}\t{}\n", TaskTypeName(type), s.sr, s.mean_ndtw, s.episodes);
  }
  out += fmt::format("ALL\t{:.4f}\t{:.4f}\t{}\n", r.overall.sr, r.overall.mean_ndtw, r.overall.episodes);
  return out;
}

std::string SuiteJson(const SuiteReport& r, const SuiteOptions& opt) {
  nlohmann::json j;
  j["scheme"] = SchemeName(opt.scheme.scheme);
  j["latency"] = opt.latency.name;
  j["seed"] = opt.scheme.seed;
  j["d_th"] = opt.d_th;
  auto summary = [](const TaskSummary& s) {
    return nlohmann::json{{"episodes", s.episodes}, {"successes", s.successes}, {"sr", s.sr},
                          {"mean_ndtw", s.mean_ndtw}};
  };
  j["overall"] = summary(r.overall);
  j["per_task"] = nlohmann::json::object();
  for (const auto& [type, s] : r.per_task) j["per_task"][std::string(TaskTypeName(type))] = summary(s);
  j["episodes"] = nlohmann::json::array();
  for (const auto& e : r.results) {
    j["episodes"].push_back({{"id", e.episode_id},
                             {"task_type", TaskTypeName(e.task_type)},
                             {"success", e.success},
                             {"ndtw", e.ndtw},
                             {"dtw_cost", e.dtw_cost},
                             {"ticks", e.ticks},
                             {"notes", e.notes}});
  }
  return j.dump(2) + "\n";
}

std::string SuiteDiagnostics(const SuiteReport& r) {
  std::string out = "episode_id\ttask_type\tsuccess\tndtw\tdtw_cost\tticks\tnotes\n";
  for (const auto& e : r.results) {
    std::string notes;
    for (const auto& n : e.notes) notes += (notes.empty() ? "" : "; ") + n;
    for (auto& ch : notes) {
      if (ch == '\t' || ch == '\n') ch = ' ';
    }
    out += fmt::format("{}\t{}\t{}\t{:.6f}\t{:.6f}\t{}\t{}\n", e.episode_id, TaskTypeName(e.task_type),
                       e.success ? 1 : 0, e.ndtw, e.dtw_cost, e.ticks, notes.empty() ? "-" : notes);
  }
  return out;
}

}  // namespace flowbench
