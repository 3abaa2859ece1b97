#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "flowbench/ingest.h"

namespace flowbench {

DatasetStats ComputeDatasetStats(const std::vector<Episode>& episodes) {
  DatasetStats stats;
  stats.count = episodes.size();
  std::map<TaskType, std::size_t> counts;
  for (const Episode& e : episodes) {
    ++counts[e.instruction.task_type];
    const double length = PathLength(e.frames);
    const int bucket = std::min(kHistogramBuckets, static_cast<int>(std::floor(length)));
    ++stats.distance_histogram[bucket];
  }
  for (const auto& [type, n] : counts) {
    stats.type_distribution[type] = static_cast<double>(n) / static_cast<double>(stats.count);
  }
  return stats;
}

namespace {

std::string BucketLabel(int bucket) {
  if (bucket >= kHistogramBuckets) return fmt::format("{}+", kHistogramBuckets);
  return fmt::format("{}-{}", bucket, bucket + 1);
}

}  // namespace

std::string StatsTable(const DatasetStats& stats) {
  std::string out = "task_type\tfraction\n";
  for (const auto& [type, fraction] : stats.type_distribution) {
    out += fmt::format("{}\t{:.6f}\n", TaskTypeName(type), fraction);
  }
  out += fmt::format("total\t{}\n\nlength_m\tcount\n", stats.count);
  for (const auto& [bucket, n] : stats.distance_histogram) {
    out += fmt::format("{}\t{}\n", BucketLabel(bucket), n);
  }
  return out;
}

std::string StatsSummaryJson(const DatasetStats& stats) {
  nlohmann::json j;
  j["count"] = stats.count;
  j["type_distribution"] = nlohmann::json::object();
  for (const auto& [type, fraction] : stats.type_distribution) {
    j["type_distribution"][std::string(TaskTypeName(type))] = fraction;
  }
  j["distance_histogram"] = nlohmann::json::array();
  for (const auto& [bucket, n] : stats.distance_histogram) {
    j["distance_histogram"].push_back({{"bucket", BucketLabel(bucket)}, {"lo_m", bucket}, {"count", n}});
  }
  return j.dump(2) + "\n";
}

}  // namespace flowbench
