#include "flowbench/latency.h"

#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

#include "flowbench/error.h"

namespace flowbench {
namespace {

double ParseSeconds(std::string_view s, std::string_view whole) {
  const std::string str(s);
  char* end = nullptr;
  const double v = std::strtod(str.c_str(), &end);
  if (str.empty() || end != str.c_str() + str.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::kConfigError, fmt::format("bad latency '{}'", whole));
  }
  return v;
}

}  // namespace

double LatencyModel::SampleInference(std::mt19937_64& rng) const {
  if (inference_hi <= inference_lo) return inference_lo;
  return std::uniform_real_distribution<double>(inference_lo, inference_hi)(rng);
}

const std::vector<std::pair<std::string, double>>& LatencyPresets() {
  static const std::vector<std::pair<std::string, double>> presets = {
      {"zero", 0.0},          {"seq2seq-uav", 0.057}, {"cma-uav", 0.067},
      {"travel-uav", 0.188},  {"openvla-uav", 0.172}, {"pi0-uav", 0.289},
  };
  return presets;
}

LatencyModel ParseLatency(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto plus = text.find('+', start);
    parts.push_back(text.substr(start, plus == std::string_view::npos ? std::string_view::npos : plus - start));
    if (plus == std::string_view::npos) break;
    start = plus + 1;
  }
  if (parts.size() != 1 && parts.size() != 3) {
    throw Error(ErrorCode::kConfigError, fmt::format("bad latency '{}'", text));
  }
  LatencyModel m;
  m.name = std::string(text);
  const std::string_view base = parts[0];
  bool found = false;
  for (const auto& [name, value] : LatencyPresets()) {
    if (base == name) {
      m.inference_lo = m.inference_hi = value;
      found = true;
    }
  }
  if (!found && base.starts_with("uniform:")) {
    const auto rest = base.substr(8);
    const auto colon = rest.find(':');
    if (colon == std::string_view::npos) throw Error(ErrorCode::kConfigError, fmt::format("bad latency '{}'", text));
    m.inference_lo = ParseSeconds(rest.substr(0, colon), text);
    m.inference_hi = ParseSeconds(rest.substr(colon + 1), text);
    found = true;
  }
  if (!found) m.inference_lo = m.inference_hi = ParseSeconds(base, text);
  if (parts.size() == 3) {
    m.uplink = ParseSeconds(parts[1], text);
    m.downlink = ParseSeconds(parts[2], text);
  }
  ValidateLatency(m);
  return m;
}

void ValidateLatency(const LatencyModel& m) {
  if (m.inference_lo < 0 || m.inference_hi < m.inference_lo || m.uplink < 0 || m.downlink < 0) {
    throw Error(ErrorCode::kConfigError, fmt::format("latency '{}' has negative or inverted components", m.name));
  }
}

}  // namespace flowbench
