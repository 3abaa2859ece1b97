#ifndef FLOWBENCH_SCHEME_H_
#define FLOWBENCH_SCHEME_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowbench/error.h"
#include "flowbench/latency.h"
#include "flowbench/policy.h"
#include "flowbench/protocol.h"
#include "flowbench/scheduler.h"
#include "flowbench/sim.h"

namespace flowbench {

enum class Scheme { kStopAndInfer, kContinuous, kGloballyAligned };

std::string_view SchemeName(Scheme s);
// Accepts stop|cont|global and the full names.
std::optional<Scheme> ParseScheme(std::string_view name);

struct SchemeConfig {
  Scheme scheme = Scheme::kGloballyAligned;
  double chunk_period = 0.4;  // s, re-inference interval for the continuous schemes
  double step_dt = kFrameDt;
  std::uint64_t seed = 0;     // latency sampling
};
void ValidateSchemeConfig(const SchemeConfig& cfg);

struct TickRecord {
  double t = 0.0;
  ControlMode mode = ControlMode::kPositionHold;
  LocalPose target;
  std::uint64_t generation = 0;  // queue generation the target came from
  std::size_t queued = 0;        // targets left after this tick's consumption
};

enum class Direction { kUp, kDown, kLocal };  // drone->ground, ground->drone, sim tick

struct TranscriptEntry {
  double t = 0.0;
  Direction dir = Direction::kLocal;
  std::optional<BridgeMessage> message;
  std::optional<TickRecord> tick;
};

using Transcript = std::vector<TranscriptEntry>;

// One line per entry, stable formatting; used for trace files and
// determinism checks.
std::string FormatTranscript(const Transcript& t);

// Queue management for one instruction. Time is supplied by the caller so the
// same logic runs on the virtual clock (RunScheme) and the wall clock (serve).
class SchemeController {
 public:
  explicit SchemeController(SchemeConfig cfg);

  void Start(double now);
  // Whether a new inference request should be issued at tick `now`.
  bool WantsInference(double now) const;
  void OnRequest(double now);
  // Applies an arrived chunk at tick `now`. `delay` is the request's total
  // latency. Returns false when the chunk is empty (task complete).
  // GloballyAligned prunes by `delay` unless the queue was empty when the
  // chunk was requested; then the UAV held throughout and etas start at `now`.
  bool Apply(const ActionChunk& chunk, double now, double delay, const UavState& current);
  // Consumes passed targets and yields this tick's command.
  ControlCommand Command(double now, const UavState& current, TickRecord* record);
  void Abort();

  bool in_flight() const { return in_flight_; }
  const TargetQueue& queue() const { return queue_; }
  const SchemeConfig& config() const { return cfg_; }

 private:
  SchemeConfig cfg_;
  TargetQueue queue_;
  bool in_flight_ = false;
  bool held_request_ = false;  // queue was empty when the pending request went out
  std::optional<double> last_request_;
  std::uint64_t next_generation_ = 1;
};

struct SchemeRun {
  std::vector<LocalPose> trajectory;  // world-frame pose per tick, starting pose first
  Transcript transcript;
  double duration = 0.0;
};

// kTimeout carrying the run up to the deadline.
class SchemeTimeout : public Error {
 public:
  SchemeTimeout(std::string detail, SchemeRun run)
      : Error(ErrorCode::kTimeout, std::move(detail)), run_(std::move(run)) {}
  const SchemeRun& run() const { return run_; }

 private:
  SchemeRun run_;
};

// Closed-loop run on a virtual clock. Throws SchemeTimeout if the policy has
// not reported completion within `timeout` seconds and kPolicyError (wrapping
// the underlying failure) if the policy throws.
SchemeRun RunScheme(const SchemeConfig& cfg, const LatencyModel& lat, Policy& policy, World world,
                    const Instruction& task, double timeout, const SimConfig& sim = {});

}  // namespace flowbench

#endif  // FLOWBENCH_SCHEME_H_
