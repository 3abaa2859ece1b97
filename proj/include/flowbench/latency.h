#ifndef FLOWBENCH_LATENCY_H_
#define FLOWBENCH_LATENCY_H_

#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace flowbench {

// Inference time is fixed (lo == hi) or drawn per call from uniform[lo, hi].
struct LatencyModel {
  std::string name = "zero";
  double inference_lo = 0.0;
  double inference_hi = 0.0;
  double uplink = 0.0;
  double downlink = 0.0;

  double SampleInference(std::mt19937_64& rng) const;
  double MeanTotal() const { return 0.5 * (inference_lo + inference_hi) + uplink + downlink; }
};

// Named presets: zero, seq2seq-uav, cma-uav, travel-uav, openvla-uav, pi0-uav.
const std::vector<std::pair<std::string, double>>& LatencyPresets();

// Accepts a preset name, a number of seconds, or `uniform:LO:HI`; an optional
// `+UP+DOWN` suffix adds link delays, e.g. `pi0-uav+0.02+0.02`.
LatencyModel ParseLatency(std::string_view text);
void ValidateLatency(const LatencyModel& m);

}  // namespace flowbench

#endif  // FLOWBENCH_LATENCY_H_
