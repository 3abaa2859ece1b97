#ifndef FLOWBENCH_SIM_H_
#define FLOWBENCH_SIM_H_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowbench/datamodel.h"
#include "flowbench/geo.h"

namespace flowbench {

enum class ObjectClass { kPerson, kCar, kTree, kMarker, kBuilding, kGate };

std::string_view ObjectClassName(ObjectClass c);
std::optional<ObjectClass> ParseObjectClass(std::string_view name);

using Vec3 = std::array<double, 3>;

struct SceneObject {
  std::string id;
  ObjectClass cls = ObjectClass::kMarker;
  Vec3 position{};
  double radius = 1.0;

  bool operator==(const SceneObject&) const = default;
};

struct ScenarioSpec {
  std::vector<SceneObject> objects;
  LocalPose uav_start;
  std::uint64_t seed = 0;

  bool operator==(const ScenarioSpec&) const = default;
};

// Simulator and oracle parameters. Speed and turn-rate limits are modelling
// assumptions, not measured values.
struct SimConfig {
  double v_max = 2.0;          // m/s
  double omega_max = 1.0;      // rad/s
  double fov_half = 0.7;       // rad
  double max_range = 60.0;     // m
  std::size_t chunk_size = kDefaultChunkSize;
  double step_dt = kFrameDt;
  double standoff_factor = 1.5;   // Approach stop distance, in object radii
  double clearance_factor = 1.5;  // PassSide / HoverBeside lateral offset, in object radii
  double plan_speed_fraction = 0.9;  // oracle paths use this share of v_max / omega_max
  double timeout = 60.0;       // s
};

struct World {
  ScenarioSpec spec;
  UavState uav;
  double clock = 0.0;
};

enum class ControlMode { kPositionHold, kGoTo };

struct ControlCommand {
  LocalPose target;
  ControlMode mode = ControlMode::kGoTo;
};

struct VisibleObject {
  std::string id;
  ObjectClass cls = ObjectClass::kMarker;
  double bearing = 0.0;    // rad, body frame, positive left
  double elevation = 0.0;  // rad
  double range = 0.0;      // m

  bool operator==(const VisibleObject&) const = default;
};

struct Observation {
  LocalPose pose;
  std::vector<VisibleObject> visible;  // sorted by range

  bool operator==(const Observation&) const = default;
};

void ValidateScenario(const ScenarioSpec& spec);
World MakeWorld(const ScenarioSpec& spec);

// First-order position-mode kinematics: straight-line motion toward the
// target capped at v_max, attitude slewed along the shortest arc at omega_max.
World Step(const World& w, const ControlCommand& cmd, double dt, const SimConfig& cfg = {});
Observation Observe(const World& w, const SimConfig& cfg = {});

const SceneObject* FindObject(const ScenarioSpec& spec, std::string_view id);
const SceneObject& RequireObject(const ScenarioSpec& spec, const std::optional<std::string>& id);

// Line-based file: `seed N`, `uav_start x y z roll pitch yaw` (degrees) and
// one `object id class x y z radius` per object.
ScenarioSpec ParseScenario(std::string_view text);
std::string SerializeScenario(const ScenarioSpec& spec);

// Body-frame <-> world-frame conversion around an anchor pose. Positions are
// rotated by the anchor yaw only; attitude offsets compose additively.
LocalPose BodyToWorld(const LocalPose& anchor, const LocalPose& offset);
LocalPose WorldToBody(const LocalPose& anchor, const LocalPose& world);

// Pose relative to `start`: translated position, relative attitude.
LocalPose RelativeToStart(const LocalPose& start, const LocalPose& p);

// A seeded scene and instruction for one task family.
struct TaskCase {
  Instruction instruction;
  ScenarioSpec scenario;
};
TaskCase MakeTaskCase(TaskType type, std::uint64_t seed);

}  // namespace flowbench

#endif  // FLOWBENCH_SIM_H_
