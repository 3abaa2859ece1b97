#ifndef FLOWBENCH_CONFIG_H_
#define FLOWBENCH_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "flowbench/eval.h"
#include "flowbench/latency.h"
#include "flowbench/scheme.h"
#include "flowbench/sim.h"

namespace flowbench {

// Run configuration. JSON keys: v_max, omega_max, fov, max_range,
// chunk_size, step_dt, chunk_period, d_th, latency, scheme, seed, timeout,
// workers, paths{episodes, scenario, out}. Unknown keys are rejected.
struct Config {
  SimConfig sim;
  SchemeConfig scheme;
  double d_th = kDefaultDtwThreshold;
  std::string latency = "zero";
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string episodes_path;
  std::string scenario_path;
  std::string out_path;
};

Config ParseConfig(std::string_view json_text);
Config LoadConfig(const std::filesystem::path& path);
// Throws kConfigError unless all physical parameters are positive and
// mutually consistent.
void ValidateConfig(const Config& c);
// Canonical JSON rendering (all keys), accepted by ParseConfig.
std::string ConfigJson(const Config& c);

}  // namespace flowbench

#endif  // FLOWBENCH_CONFIG_H_
