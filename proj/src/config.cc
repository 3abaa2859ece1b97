#include "flowbench/config.h"

#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "flowbench/dataset.h"
#include "flowbench/error.h"

namespace flowbench {
namespace {

using nlohmann::json;

[[noreturn]] void Fail(const std::string& msg) { throw Error(ErrorCode::kConfigError, msg); }

double Number(const json& v, const std::string& key) {
  if (!v.is_number()) Fail(fmt::format("'{}' must be a number", key));
  return v.get<double>();
}

std::uint64_t Count(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) Fail(fmt::format("'{}' must be a non-negative integer", key));
  return v.get<std::uint64_t>();
}

std::string Text(const json& v, const std::string& key) {
  if (!v.is_string()) Fail(fmt::format("'{}' must be a string", key));
  return v.get<std::string>();
}

}  // namespace

Config ParseConfig(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    Fail(fmt::format("config is not valid JSON: {}", e.what()));
  }
  if (!j.is_object()) Fail("config must be a JSON object");
  Config c;
  for (const auto& [key, v] : j.items()) {
    if (key == "v_max") c.sim.v_max = Number(v, key);
    else if (key == "omega_max") c.sim.omega_max = Number(v, key);
    else if (key == "fov") c.sim.fov_half = Number(v, key) / 2.0;
    else if (key == "max_range") c.sim.max_range = Number(v, key);
    else if (key == "chunk_size") c.sim.chunk_size = Count(v, key);
    else if (key == "step_dt") c.sim.step_dt = c.scheme.step_dt = Number(v, key);
    else if (key == "chunk_period") c.scheme.chunk_period = Number(v, key);
    else if (key == "d_th") c.d_th = Number(v, key);
    else if (key == "timeout") c.sim.timeout = Number(v, key);
    else if (key == "latency") c.latency = Text(v, key);
    else if (key == "seed") c.seed = c.scheme.seed = Count(v, key);
    else if (key == "workers") c.workers = static_cast<unsigned>(Count(v, key));
    else if (key == "scheme") {
      auto s = ParseScheme(Text(v, key));
      if (!s) Fail(fmt::format("unknown scheme '{}'", v.get<std::string>()));
      c.scheme.scheme = *s;
    } else if (key == "paths") {
      if (!v.is_object()) Fail("'paths' must be an object");
      for (const auto& [pk, pv] : v.items()) {
        if (pk == "episodes") c.episodes_path = Text(pv, "paths." + pk);
        else if (pk == "scenario") c.scenario_path = Text(pv, "paths." + pk);
        else if (pk == "out") c.out_path = Text(pv, "paths." + pk);
        else Fail(fmt::format("unknown config key 'paths.{}'", pk));
      }
    } else {
      Fail(fmt::format("unknown config key '{}'", key));
    }
  }
  ValidateConfig(c);
  return c;
}

Config LoadConfig(const std::filesystem::path& path) { return ParseConfig(ReadFile(path)); }

void ValidateConfig(const Config& c) {
  auto positive = [](double v, const char* name) {
    if (!(std::isfinite(v) && v > 0.0)) Fail(fmt::format("'{}' must be positive, got {}", name, v));
  };
  positive(c.sim.v_max, "v_max");
  positive(c.sim.omega_max, "omega_max");
  positive(c.sim.fov_half, "fov");
  positive(c.sim.max_range, "max_range");
  positive(c.sim.step_dt, "step_dt");
  positive(c.scheme.chunk_period, "chunk_period");
  positive(c.d_th, "d_th");
  positive(c.sim.timeout, "timeout");
  if (c.sim.chunk_size < 1 || c.sim.chunk_size > kMaxChunkTargets) {
    Fail(fmt::format("'chunk_size' must be in [1, {}]", kMaxChunkTargets));
  }
  if (c.sim.step_dt > 0.5) Fail("'step_dt' must not exceed 0.5");
  if (c.scheme.chunk_period < c.scheme.step_dt - 1e-9) Fail("'chunk_period' must be >= step_dt");
  if (c.workers < 1) Fail("'workers' must be >= 1");
  ParseLatency(c.latency);
}

std::string ConfigJson(const Config& c) {
  json j = {
      {"v_max", c.sim.v_max},
      {"omega_max", c.sim.omega_max},
      {"fov", 2.0 * c.sim.fov_half},
      {"max_range", c.sim.max_range},
      {"chunk_size", c.sim.chunk_size},
      {"step_dt", c.sim.step_dt},
      {"chunk_period", c.scheme.chunk_period},
      {"d_th", c.d_th},
      {"timeout", c.sim.timeout},
      {"latency", c.latency},
      {"scheme", SchemeName(c.scheme.scheme)},
      {"seed", c.seed},
      {"workers", c.workers},
      {"paths", {{"episodes", c.episodes_path}, {"scenario", c.scenario_path}, {"out", c.out_path}}},
  };
  return j.dump(2) + "\n";
}

}  // namespace flowbench
