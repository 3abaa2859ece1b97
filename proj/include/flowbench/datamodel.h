#ifndef FLOWBENCH_DATAMODEL_H_
#define FLOWBENCH_DATAMODEL_H_

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowbench/geo.h"

namespace flowbench {

inline constexpr double kFrameDt = 0.2;
inline constexpr double kFrameDtTolerance = 1e-6;
inline constexpr std::size_t kDefaultChunkSize = 10;
inline constexpr std::size_t kMaxChunkTargets = 64;

enum class TaskType {
  kTakeoff,
  kTranslate,
  kRotate,
  kDive,
  kApproach,
  kOrbit,
  kPassSide,
  kFlyBetween,
  kHoverBeside,
  kFaceTarget,
};
inline constexpr std::array<TaskType, 10> kAllTaskTypes = {
    TaskType::kTakeoff,  TaskType::kTranslate, TaskType::kRotate,     TaskType::kDive,
    TaskType::kApproach, TaskType::kOrbit,     TaskType::kPassSide,   TaskType::kFlyBetween,
    TaskType::kHoverBeside, TaskType::kFaceTarget};

enum class InstructionForm { kFixed, kOpenVocabulary };
enum class Side { kLeft, kRight };
enum class EpisodeSource { kRealLog, kSimManual, kSimRuleBased };

std::string_view TaskTypeName(TaskType t);
std::optional<TaskType> ParseTaskType(std::string_view name);  // case-insensitive
std::string_view FormName(InstructionForm f);
std::optional<InstructionForm> ParseForm(std::string_view name);
std::string_view SideName(Side s);
std::optional<Side> ParseSide(std::string_view name);
std::string_view SourceName(EpisodeSource s);
std::optional<EpisodeSource> ParseSource(std::string_view name);
bool IsObjectTask(TaskType t);

// Task parameters. Angles are radians; a positive Rotate angle turns left
// (counter-clockwise seen from above). For Translate, `angle` is the heading
// relative to the body forward axis. Orbit uses `distance` as radius and
// `side` as sweep direction, both optional.
struct InstructionParams {
  std::optional<double> distance;
  std::optional<double> angle;
  std::optional<Side> side;
  std::optional<std::string> target;
  std::optional<std::string> target2;

  bool operator==(const InstructionParams&) const = default;
};

struct Instruction {
  std::string text;
  TaskType task_type = TaskType::kTakeoff;
  InstructionForm form = InstructionForm::kFixed;
  InstructionParams params;

  bool operator==(const Instruction&) const = default;
};

struct Frame {
  double t = 0.0;
  LocalPose pose;
  std::string obs_ref;

  bool operator==(const Frame&) const = default;
};

struct Episode {
  std::string id;
  Instruction instruction;
  std::optional<GeoPose> origin;
  std::vector<Frame> frames;
  EpisodeSource source = EpisodeSource::kSimRuleBased;

  bool operator==(const Episode&) const = default;
};

struct UavState {
  double t = 0.0;
  LocalPose pose;
  std::array<double, 3> velocity{};

  bool operator==(const UavState&) const = default;
};

// Targets are offsets in the anchor's body frame (x forward, y left, z up;
// attitude offsets relative to the anchor attitude). An empty chunk signals
// that the policy considers the task complete.
struct ActionChunk {
  double t_inf = 0.0;
  UavState anchor;
  std::vector<LocalPose> targets;
  double step_dt = kFrameDt;

  bool operator==(const ActionChunk&) const = default;
};

struct Violation {
  std::string field;
  std::string message;

  bool operator==(const Violation&) const = default;
};

struct ValidationLimits {
  double v_max = 5.0;
  double max_path_length = 200.0;
};

// Canonical Fixed Command Set text for a task with the given parameters.
std::string RenderFixedText(TaskType type, const InstructionParams& params);
// Builds a Fixed-form instruction with canonical text.
Instruction MakeFixedInstruction(TaskType type, InstructionParams params);
std::vector<Violation> CheckInstruction(const Instruction& ins);

// Structural invariants only (these gate serialization).
std::vector<Violation> CheckEpisodeInvariants(const Episode& e);
// Invariants plus kinematic sanity bounds.
std::vector<Violation> ValidateEpisode(const Episode& e, const ValidationLimits& limits = {});

double PathLength(const std::vector<Frame>& frames);

std::string SerializeEpisode(const Episode& e);
Episode DeserializeEpisode(std::string_view bytes);

// Parses "orbit:target=car1,radius=3" style task descriptions into a Fixed
// instruction. Angles are given in degrees.
Instruction ParseTaskSpec(std::string_view spec);

// Shortest decimal with at most three fractional digits ("5", "2.5").
std::string FormatNumber(double v);

std::string PercentEscape(std::string_view s);
std::string PercentUnescape(std::string_view s);

}  // namespace flowbench

#endif  // FLOWBENCH_DATAMODEL_H_
