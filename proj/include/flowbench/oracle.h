#ifndef FLOWBENCH_ORACLE_H_
#define FLOWBENCH_ORACLE_H_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "flowbench/datamodel.h"
#include "flowbench/sim.h"

namespace flowbench {

// World-frame reference path sampled at step_dt; consecutive poses are
// reachable within one simulator step at the plan speed.
struct OraclePlan {
  std::vector<LocalPose> poses;
};

OraclePlan BuildOraclePlan(const Instruction& task, const ScenarioSpec& spec, const LocalPose& start,
                           const SimConfig& cfg = {});

// Effective orbit radius for an Orbit task (parameter or twice the object radius).
double OrbitRadius(const Instruction& task, const SceneObject& target);

// Geometric expert. The plan is built from the first state it sees; later
// calls locate the UAV along the plan and emit the next chunk in the anchor
// body frame, or an empty chunk once the end of the plan is reached.
class OraclePolicy {
 public:
  explicit OraclePolicy(Instruction task, ScenarioSpec spec, SimConfig cfg = {});

  ActionChunk NextChunk(const UavState& state);
  ActionChunk NextChunk(const World& w) { return NextChunk(w.uav); }

  const OraclePlan& plan() const { return plan_; }
  std::size_t progress() const { return progress_; }

 private:
  Instruction task_;
  ScenarioSpec spec_;
  SimConfig cfg_;
  OraclePlan plan_;
  bool planned_ = false;
  std::size_t progress_ = 0;
  double progress_time_ = 0.0;
};

// Runs the oracle against the kinematic simulator at 5 Hz until the oracle
// reports completion. Throws kTimeout after cfg.timeout seconds.
Episode GenerateEpisode(const Instruction& task, const ScenarioSpec& spec, const std::string& id,
                        const SimConfig& cfg = {});

}  // namespace flowbench

#endif  // FLOWBENCH_ORACLE_H_
