#ifndef FLOWBENCH_INGEST_H_
#define FLOWBENCH_INGEST_H_

#include <chrono>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "flowbench/datamodel.h"
#include "flowbench/geo.h"

namespace flowbench {

struct StateSample {
  double t_wall = 0.0;
  GeoPose pose;
};

struct StateLog {
  std::vector<StateSample> samples;
};

struct FrameIndexEntry {
  double t_wall = 0.0;
  std::string obs_ref;
};

struct FrameIndex {
  std::vector<FrameIndexEntry> entries;
};

// CSV `t_wall,lat,lon,alt,roll_deg,pitch_deg,yaw_deg`, optional header row.
StateLog ParseFlightLog(std::string_view csv);
// CSV `t_wall,obs_ref`, optional header row.
FrameIndex ParseFrameIndex(std::string_view csv);

GeoPose InterpolateState(const StateLog& log, double t);

inline constexpr double kMinOverlapSeconds = 0.4;

// Resamples the log on a uniform grid anchored at the first common timestamp
// of log and frames, pairs every grid point with the nearest frame (ties go
// to the earlier frame) and re-expresses poses relative to the first grid
// pose. Positions are interpolated on the tangent plane of the first log
// sample.
Episode AlignAndResample(const StateLog& log, const FrameIndex& frames, const Instruction& instruction,
                         std::string id, double rate_hz = 5.0);

// Shifts all frames so that frame 0 becomes the origin; the GPS origin (if
// present) moves to the old frame 0 position.
Episode RecenterEpisode(Episode e);

// Fixed templates and open-vocabulary paraphrases per task type. Templates
// use the placeholders {distance}, {angle}, {side}, {direction}, {turn},
// {radius_clause} and {orbit_dir}.
struct CommandSet {
  std::map<TaskType, std::string> templates;
  std::map<TaskType, std::vector<std::string>> variants;
};

CommandSet DefaultCommandSet();
// Line format: `template<TAB>TaskType<TAB>text` or `variant<TAB>TaskType<TAB>text`.
CommandSet ParseCommandSet(std::string_view text);
std::string SerializeCommandSet(const CommandSet& set);
std::string RenderTemplate(std::string_view tmpl, const InstructionParams& params);

// Narrow text-in/text-out client for an external paraphrase service.
class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  // Throws Error(kGeneratorUnavailable) when the service cannot be reached.
  virtual std::vector<std::string> Paraphrase(const std::string& base, TaskType type, int n) = 0;
};

// POSTs {"instruction", "task_type", "n"} as JSON and expects
// {"variants": [...]}. One retry after a failed attempt.
class HttpTextGenerator : public TextGenerator {
 public:
  HttpTextGenerator(std::string host, int port, std::string path = "/paraphrase",
                    std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));
  std::vector<std::string> Paraphrase(const std::string& base, TaskType type, int n) override;

 private:
  std::string host_;
  int port_;
  std::string path_;
  std::chrono::milliseconds timeout_;
};

// Checks that an open-vocabulary variant keeps the task's side, distance and
// angle parameters verbatim.
bool VariantMentionsParams(const std::string& text, const Instruction& fixed);

// With `generator == nullptr` the built-in paraphrase table is used. When the
// generator is unavailable and `fallback` is set, the table is used instead.
std::vector<Instruction> DiversifyInstruction(const Instruction& fixed, TextGenerator* generator, int n,
                                              bool fallback = true,
                                              const CommandSet& set = DefaultCommandSet());

inline constexpr int kHistogramBuckets = 50;  // 1 m buckets; bucket 50 holds >= 50 m

struct DatasetStats {
  std::size_t count = 0;
  std::map<TaskType, double> type_distribution;
  std::map<int, std::size_t> distance_histogram;
};

DatasetStats ComputeDatasetStats(const std::vector<Episode>& episodes);
std::string StatsTable(const DatasetStats& stats);
std::string StatsSummaryJson(const DatasetStats& stats);

}  // namespace flowbench

#endif  // FLOWBENCH_INGEST_H_
