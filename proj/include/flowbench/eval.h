#ifndef FLOWBENCH_EVAL_H_
#define FLOWBENCH_EVAL_H_

#include <map>
#include <string>
#include <vector>

#include "flowbench/datamodel.h"
#include "flowbench/geo.h"
#include "flowbench/latency.h"
#include "flowbench/policy.h"
#include "flowbench/scheme.h"
#include "flowbench/sim.h"

namespace flowbench {

using Trajectory = std::vector<LocalPose>;

inline constexpr double kDefaultDtwThreshold = 3.0;  // m

// Classic DTW, Euclidean local cost, steps (1,0), (0,1), (1,1), both ends
// matched. Throws kEmptyTrajectory.
double Dtw(const std::vector<Vec6>& a, const std::vector<Vec6>& b);
double Ndtw(const Trajectory& pred, const Trajectory& ref, double d_th = kDefaultDtwThreshold);
// exp(-cost / (ref_len * d_th)).
double NdtwFromCost(double cost, std::size_t ref_len, double d_th = kDefaultDtwThreshold);

struct SuccessRule {
  double distance_tolerance = 0.2;  // Translate / Takeoff / Dive, fraction of commanded
  double heading_tolerance = DegToRad(15.0);
  double rotate_tolerance = DegToRad(15.0);
  double rotate_max_displacement = 1.0;  // m
  double approach_lo = 0.5;              // final range, in standoff units
  double approach_hi = 3.0;
  double standoff_factor = 1.5;
  double orbit_min_sweep = DegToRad(300.0);
  double orbit_radial_tolerance = 0.3;  // fraction of radius
  double lateral_lo = 0.5;              // PassSide / HoverBeside lateral offset, m
  double lateral_hi = 4.0;
  double midline_tolerance = 1.0;  // FlyBetween, m
  double hover_max_drift = 0.3;    // m over the final second
  double face_tolerance = DegToRad(10.0);
  double final_window = 1.0;  // s
  double step_dt = kFrameDt;
};

struct SuccessResult {
  bool success = false;
  std::vector<std::string> notes;
};

// `traj` is in the scenario's world frame, one pose per tick.
SuccessResult CheckSuccess(const Trajectory& traj, const Instruction& task, const ScenarioSpec& spec,
                           const SuccessRule& rule = {});

struct EvalCase {
  Episode reference;  // frames relative to the start pose
  ScenarioSpec scenario;
};

struct EvalResult {
  std::string episode_id;
  TaskType task_type = TaskType::kTakeoff;
  bool success = false;
  double ndtw = 0.0;
  double dtw_cost = 0.0;
  std::size_t ticks = 0;
  std::vector<std::string> notes;
};

struct TaskSummary {
  std::size_t episodes = 0;
  std::size_t successes = 0;
  double sr = 0.0;
  double mean_ndtw = 0.0;
};

struct SuiteReport {
  std::vector<EvalResult> results;  // ordered by episode id
  std::map<TaskType, TaskSummary> per_task;
  TaskSummary overall;
};

struct SuiteOptions {
  SchemeConfig scheme;
  LatencyModel latency;
  SimConfig sim;
  SuccessRule rule;
  double d_th = kDefaultDtwThreshold;
  double timeout = 60.0;
  unsigned workers = 1;
};

// Creates a fresh policy for one case; called once per episode (possibly
// from worker threads).
using PolicyMaker = std::function<std::unique_ptr<Policy>(const EvalCase&)>;

EvalResult EvaluateCase(const EvalCase& c, Policy& policy, const SuiteOptions& opt);
// Per-episode failures are recorded, never thrown.
SuiteReport EvaluateSuite(const std::vector<EvalCase>& cases, const PolicyMaker& make, const SuiteOptions& opt);

// task_type, SR, mean NDTW, episodes; one row per task type plus ALL.
std::string SuiteTable(const SuiteReport& r);
std::string SuiteJson(const SuiteReport& r, const SuiteOptions& opt);
// episode_id, task_type, success, ndtw, dtw_cost, ticks, notes.
std::string SuiteDiagnostics(const SuiteReport& r);

}  // namespace flowbench

#endif  // FLOWBENCH_EVAL_H_
