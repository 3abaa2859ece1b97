#include "flowbench/sim.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>
#include <set>

#include <fmt/format.h>

#include "flowbench/error.h"

namespace flowbench {
namespace {

bool Finite(const LocalPose& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z) && std::isfinite(p.roll) &&
         std::isfinite(p.pitch) && std::isfinite(p.yaw);
}

double Slew(double from, double to, double max_step) {
  const double diff = AngleDiff(from, to);
  if (std::abs(diff) <= max_step) return WrapAngle(to);
  return WrapAngle(from + std::copysign(max_step, diff));
}

std::string Fixed6(double v) {
  std::string s = fmt::format("{:.6f}", v);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

// Portable uniform draw from a 64-bit engine.
double Uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename T>
const T& Pick(std::mt19937_64& rng, const std::vector<T>& items) {
  return items[rng() % items.size()];
}

}  // namespace

std::string_view ObjectClassName(ObjectClass c) {
  switch (c) {
    case ObjectClass::kPerson: return "person";
    case ObjectClass::kCar: return "car";
    case ObjectClass::kTree: return "tree";
    case ObjectClass::kMarker: return "marker";
    case ObjectClass::kBuilding: return "building";
    case ObjectClass::kGate: return "gate";
  }
  return "?";
}

std::optional<ObjectClass> ParseObjectClass(std::string_view name) {
  for (ObjectClass c : {ObjectClass::kPerson, ObjectClass::kCar, ObjectClass::kTree, ObjectClass::kMarker,
                        ObjectClass::kBuilding, ObjectClass::kGate}) {
    if (ObjectClassName(c) == name) return c;
  }
  return std::nullopt;
}

void ValidateScenario(const ScenarioSpec& spec) {
  std::set<std::string> ids;
  for (const auto& o : spec.objects) {
    if (o.id.empty()) throw Error(ErrorCode::kInvariantViolation, "object id is empty");
    if (!ids.insert(o.id).second) {
      throw Error(ErrorCode::kInvariantViolation, fmt::format("duplicate object id '{}'", o.id));
    }
    if (!(o.radius > 0.0) || !std::isfinite(o.radius)) {
      throw Error(ErrorCode::kInvariantViolation, fmt::format("object '{}' radius must be positive", o.id));
    }
    for (double c : o.position) {
      if (!std::isfinite(c)) throw Error(ErrorCode::kInvariantViolation, fmt::format("object '{}' position", o.id));
    }
  }
  if (!Finite(spec.uav_start)) throw Error(ErrorCode::kInvariantViolation, "uav_start is not finite");
  if (spec.uav_start.z < 0.0) throw Error(ErrorCode::kInvariantViolation, "uav_start below ground");
}

World MakeWorld(const ScenarioSpec& spec) {
  ValidateScenario(spec);
  World w;
  w.spec = spec;
  w.uav.pose = spec.uav_start;
  w.uav.pose.roll = WrapAngle(w.uav.pose.roll);
  w.uav.pose.pitch = WrapAngle(w.uav.pose.pitch);
  w.uav.pose.yaw = WrapAngle(w.uav.pose.yaw);
  return w;
}

World Step(const World& w, const ControlCommand& cmd, double dt, const SimConfig& cfg) {
  if (!(dt > 0.0 && dt <= 0.5)) throw Error(ErrorCode::kInvalidDt, fmt::format("dt {} outside (0, 0.5]", dt));
  World next = w;
  next.clock = w.clock + dt;
  next.uav.t = next.clock;
  next.uav.velocity = {0.0, 0.0, 0.0};
  if (cmd.mode == ControlMode::kPositionHold) return next;
  if (!Finite(cmd.target)) throw Error(ErrorCode::kInvariantViolation, "command target is not finite");

  const LocalPose& from = w.uav.pose;
  LocalPose& to = next.uav.pose;
  const double dx = cmd.target.x - from.x;
  const double dy = cmd.target.y - from.y;
  const double dz = cmd.target.z - from.z;
  const double dist = std::hypot(dx, dy, dz);
  const double reach = cfg.v_max * dt;
  if (dist <= reach) {
    to.x = cmd.target.x;
    to.y = cmd.target.y;
    to.z = cmd.target.z;
  } else {
    const double s = reach / dist;
    to.x = from.x + dx * s;
    to.y = from.y + dy * s;
    to.z = from.z + dz * s;
  }
  next.uav.velocity = {(to.x - from.x) / dt, (to.y - from.y) / dt, (to.z - from.z) / dt};
  const double turn = cfg.omega_max * dt;
  to.roll = Slew(from.roll, cmd.target.roll, turn);
  to.pitch = Slew(from.pitch, cmd.target.pitch, turn);
  to.yaw = Slew(from.yaw, cmd.target.yaw, turn);
  return next;
}

Observation Observe(const World& w, const SimConfig& cfg) {
  Observation obs;
  obs.pose = w.uav.pose;
  const LocalPose& p = w.uav.pose;
  for (const auto& o : w.spec.objects) {
    const double dx = o.position[0] - p.x;
    const double dy = o.position[1] - p.y;
    const double dz = o.position[2] - p.z;
    const double range = std::hypot(dx, dy, dz);
    if (range > cfg.max_range) continue;
    const double horizontal = std::hypot(dx, dy);
    const double bearing = horizontal > 0.0 ? AngleDiff(p.yaw, std::atan2(dy, dx)) : 0.0;
    if (std::abs(bearing) > cfg.fov_half) continue;
    obs.visible.push_back({o.id, o.cls, bearing, std::atan2(dz, horizontal), range});
  }
  std::sort(obs.visible.begin(), obs.visible.end(), [](const VisibleObject& a, const VisibleObject& b) {
    return a.range != b.range ? a.range < b.range : a.id < b.id;
  });
  return obs;
}

const SceneObject* FindObject(const ScenarioSpec& spec, std::string_view id) {
  for (const auto& o : spec.objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

const SceneObject& RequireObject(const ScenarioSpec& spec, const std::optional<std::string>& id) {
  if (!id) throw Error(ErrorCode::kUnresolvedTarget, "task has no target object");
  const SceneObject* o = FindObject(spec, *id);
  if (o == nullptr) throw Error(ErrorCode::kUnresolvedTarget, fmt::format("no object '{}' in scene", *id));
  return *o;
}

ScenarioSpec ParseScenario(std::string_view text) {
  ScenarioSpec spec;
  bool have_start = false;
  int line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(start, nl - start));
    start = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;

    std::vector<std::string> tok;
    std::size_t pos = first;
    while (pos < line.size()) {
      const auto end = line.find_first_of(" \t", pos);
      tok.push_back(line.substr(pos, end == std::string::npos ? std::string::npos : end - pos));
      if (end == std::string::npos) break;
      pos = line.find_first_not_of(" \t", end);
      if (pos == std::string::npos) break;
    }
    auto num = [&](std::size_t i) {
      char* endp = nullptr;
      const double v = std::strtod(tok[i].c_str(), &endp);
      if (endp != tok[i].c_str() + tok[i].size() || !std::isfinite(v)) {
        throw Error(ErrorCode::kParseError, fmt::format("bad number '{}'", tok[i]), line_no);
      }
      return v;
    };
    if (tok[0] == "seed" && tok.size() == 2) {
      char* endp = nullptr;
      spec.seed = std::strtoull(tok[1].c_str(), &endp, 10);
      if (endp != tok[1].c_str() + tok[1].size()) throw Error(ErrorCode::kParseError, "bad seed", line_no);
    } else if (tok[0] == "uav_start" && tok.size() == 7) {
      spec.uav_start = {num(1), num(2), num(3), WrapAngle(DegToRad(num(4))), WrapAngle(DegToRad(num(5))),
                        WrapAngle(DegToRad(num(6)))};
      have_start = true;
    } else if (tok[0] == "object" && tok.size() == 7) {
      auto cls = ParseObjectClass(tok[2]);
      if (!cls) throw Error(ErrorCode::kParseError, fmt::format("unknown object class '{}'", tok[2]), line_no);
      spec.objects.push_back({tok[1], *cls, {num(3), num(4), num(5)}, num(6)});
    } else {
      throw Error(ErrorCode::kParseError, fmt::format("unrecognized record '{}'", line), line_no);
    }
  }
  if (!have_start) throw Error(ErrorCode::kParseError, "scenario lacks a uav_start record");
  ValidateScenario(spec);
  return spec;
}

std::string SerializeScenario(const ScenarioSpec& spec) {
  std::string out = "# flowbench scenario\n";
  out += fmt::format("seed {}\n", spec.seed);
  const auto& s = spec.uav_start;
  out += fmt::format("uav_start {} {} {} {} {} {}\n", Fixed6(s.x), Fixed6(s.y), Fixed6(s.z),
                     Fixed6(RadToDeg(s.roll)), Fixed6(RadToDeg(s.pitch)), Fixed6(RadToDeg(s.yaw)));
  for (const auto& o : spec.objects) {
    out += fmt::format("object {} {} {} {} {} {}\n", o.id, ObjectClassName(o.cls), Fixed6(o.position[0]),
                       Fixed6(o.position[1]), Fixed6(o.position[2]), Fixed6(o.radius));
  }
  return out;
}

LocalPose BodyToWorld(const LocalPose& anchor, const LocalPose& offset) {
  const double c = std::cos(anchor.yaw);
  const double s = std::sin(anchor.yaw);
  return {anchor.x + c * offset.x - s * offset.y,
          anchor.y + s * offset.x + c * offset.y,
          anchor.z + offset.z,
          WrapAngle(anchor.roll + offset.roll),
          WrapAngle(anchor.pitch + offset.pitch),
          WrapAngle(anchor.yaw + offset.yaw)};
}

LocalPose WorldToBody(const LocalPose& anchor, const LocalPose& world) {
  const double c = std::cos(anchor.yaw);
  const double s = std::sin(anchor.yaw);
  const double dx = world.x - anchor.x;
  const double dy = world.y - anchor.y;
  return {c * dx + s * dy,
          -s * dx + c * dy,
          world.z - anchor.z,
          AngleDiff(anchor.roll, world.roll),
          AngleDiff(anchor.pitch, world.pitch),
          AngleDiff(anchor.yaw, world.yaw)};
}

LocalPose RelativeToStart(const LocalPose& start, const LocalPose& p) {
  return {p.x - start.x,
          p.y - start.y,
          p.z - start.z,
          AngleDiff(start.roll, p.roll),
          AngleDiff(start.pitch, p.pitch),
          AngleDiff(start.yaw, p.yaw)};
}

TaskCase MakeTaskCase(TaskType type, std::uint64_t seed) {
  std::mt19937_64 rng(seed * 1000003ULL + static_cast<std::uint64_t>(type) + 1);
  TaskCase tc;
  ScenarioSpec& spec = tc.scenario;
  spec.seed = seed;

  const double yaw0 = WrapAngle(DegToRad(15.0 * static_cast<double>(rng() % 24) - 165.0));
  const double z0 = 8.0 + 0.5 * static_cast<double>(rng() % 9);
  const double x0 = static_cast<double>(rng() % 11) - 5.0;
  const double y0 = static_cast<double>(rng() % 11) - 5.0;
  spec.uav_start = {x0, y0, z0, 0.0, 0.0, yaw0};
  const double fx = std::cos(yaw0), fy = std::sin(yaw0);
  const double lx = -fy, ly = fx;

  const std::vector<ObjectClass> classes = {ObjectClass::kPerson, ObjectClass::kCar, ObjectClass::kTree,
                                            ObjectClass::kMarker, ObjectClass::kBuilding, ObjectClass::kGate};
  int counter = 0;
  auto add_object = [&](double x, double y, double radius) -> std::string {
    const ObjectClass cls = Pick(rng, classes);
    std::string id = fmt::format("{}{}", ObjectClassName(cls), ++counter);
    spec.objects.push_back({id, cls, {x, y, radius}, radius});
    return id;
  };

  InstructionParams params;
  const std::vector<double> radii = {0.5, 0.75, 1.0, 1.25, 1.5};
  switch (type) {
    case TaskType::kTakeoff:
      params.distance = Pick(rng, std::vector<double>{2, 3, 4, 5});
      break;
    case TaskType::kTranslate:
      params.distance = Pick(rng, std::vector<double>{3, 4, 5, 6});
      params.angle = DegToRad(Pick(rng, std::vector<double>{0, 90, 180, -90}));
      break;
    case TaskType::kRotate:
      params.angle = DegToRad(Pick(rng, std::vector<double>{90, -90, 135, -135, 180}));
      break;
    case TaskType::kDive:
      params.distance = Pick(rng, std::vector<double>{2, 3, 4});
      break;
    case TaskType::kApproach:
    case TaskType::kPassSide:
    case TaskType::kHoverBeside: {
      const double d = Pick(rng, std::vector<double>{6, 7, 8, 9, 10});
      const double jitter = DegToRad(Pick(rng, std::vector<double>{-10, -5, 0, 5, 10}));
      const double b = yaw0 + jitter;
      params.target = add_object(x0 + d * std::cos(b), y0 + d * std::sin(b), Pick(rng, radii));
      if (type != TaskType::kApproach) params.side = rng() % 2 == 0 ? Side::kLeft : Side::kRight;
      break;
    }
    case TaskType::kOrbit: {
      const double r = Pick(rng, std::vector<double>{1.0, 1.25, 1.5});
      params.target = add_object(x0 + 2.0 * r * fx, y0 + 2.0 * r * fy, r);
      if (rng() % 2 == 0) params.side = rng() % 2 == 0 ? Side::kLeft : Side::kRight;
      break;
    }
    case TaskType::kFaceTarget: {
      const double d = Pick(rng, std::vector<double>{6, 8, 10});
      const double rel = DegToRad(Pick(rng, std::vector<double>{-150, -120, -90, -60, 60, 90, 120, 150}));
      params.target = add_object(x0 + d * std::cos(yaw0 + rel), y0 + d * std::sin(yaw0 + rel), Pick(rng, radii));
      break;
    }
    case TaskType::kFlyBetween: {
      const double d = Pick(rng, std::vector<double>{6, 7, 8});
      const double gap = Pick(rng, std::vector<double>{4, 5, 6});
      const double mx = x0 + d * fx, my = y0 + d * fy;
      params.target = add_object(mx + 0.5 * gap * lx, my + 0.5 * gap * ly, Pick(rng, std::vector<double>{0.5, 0.75, 1.0}));
      params.target2 = add_object(mx - 0.5 * gap * lx, my - 0.5 * gap * ly, Pick(rng, std::vector<double>{0.5, 0.75, 1.0}));
      break;
    }
  }
  // Distractors well behind the start, clear of every task path.
  for (int i = 0; i < 2; ++i) {
    const double back = 15.0 + 5.0 * Uniform01(rng);
    const double lateral = -10.0 + 20.0 * Uniform01(rng);
    add_object(x0 - back * fx + lateral * lx, y0 - back * fy + lateral * ly, Pick(rng, radii));
  }
  tc.instruction = MakeFixedInstruction(type, params);
  // Quantize through the file format so a saved scenario replays identically.
  tc.scenario = ParseScenario(SerializeScenario(spec));
  return tc;
}

}  // namespace flowbench
