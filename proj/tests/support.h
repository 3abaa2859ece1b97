#ifndef FLOWBENCH_TESTS_SUPPORT_H_
#define FLOWBENCH_TESTS_SUPPORT_H_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "flowbench/datamodel.h"
#include "flowbench/geo.h"
#include "flowbench/ingest.h"
#include "flowbench/protocol.h"
#include "flowbench/sim.h"

namespace flowbench::testing {

inline double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int UniformInt(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Long-double position of a piecewise-linear log at `t`, on the tangent
// plane of its first sample.
inline std::array<long double, 3> LogPlanePosition(const StateLog& log, double t) {
  const long double m_per_deg = 6371000.0L * 3.14159265358979323846264338327950288L / 180.0L;
  const GeoPose& o = log.samples.front().pose;
  const long double cos0 = std::cos(static_cast<long double>(o.lat) * 3.14159265358979323846264338327950288L / 180.0L);
  auto project = [&](const GeoPose& g) {
    return std::array<long double, 3>{(static_cast<long double>(g.lon) - o.lon) * cos0 * m_per_deg,
                                      (static_cast<long double>(g.lat) - o.lat) * m_per_deg,
                                      static_cast<long double>(g.alt) - o.alt};
  };
  std::size_t i = 0;
  while (i + 2 < log.samples.size() && t > log.samples[i + 1].t_wall) ++i;
  const auto a = project(log.samples[i].pose);
  if (log.samples.size() == 1) return a;
  const auto b = project(log.samples[i + 1].pose);
  const long double f = (static_cast<long double>(t) - log.samples[i].t_wall) /
                        (static_cast<long double>(log.samples[i + 1].t_wall) - log.samples[i].t_wall);
  return {a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]), a[2] + f * (b[2] - a[2])};
}

inline double Euclid(const Vec6& a, const Vec6& b) {
  double s = 0.0;
  for (int k = 0; k < 6; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

// Enumerates every monotone alignment path from (0,0) to (n-1,m-1) by
// depth-first search and returns the cheapest total cost.
inline double BruteForceDtw(const std::vector<Vec6>& a, const std::vector<Vec6>& b) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = a.size(), m = b.size();
  auto walk = [&](auto&& self, std::size_t i, std::size_t j, double acc) -> void {
    acc += Euclid(a[i], b[j]);
    if (i + 1 == n && j + 1 == m) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < n) self(self, i + 1, j, acc);
    if (j + 1 < m) self(self, i, j + 1, acc);
    if (i + 1 < n && j + 1 < m) self(self, i + 1, j + 1, acc);
  };
  walk(walk, 0, 0, 0.0);
  return best;
}

inline std::vector<Vec6> RandomVec6Seq(std::mt19937_64& rng, std::size_t len) {
  std::vector<Vec6> out(len);
  for (auto& v : out) {
    for (int k = 0; k < 3; ++k) v[k] = Uniform(rng, -10.0, 10.0);
    for (int k = 3; k < 6; ++k) v[k] = Uniform(rng, -1.0, 1.0);
  }
  return out;
}

inline LocalPose RandomPose(std::mt19937_64& rng, double extent = 20.0) {
  LocalPose p;
  p.x = Uniform(rng, -extent, extent);
  p.y = Uniform(rng, -extent, extent);
  p.z = Uniform(rng, 0.0, extent);
  p.roll = Uniform(rng, -0.3, 0.3);
  p.pitch = Uniform(rng, -0.3, 0.3);
  p.yaw = Uniform(rng, -kPi, kPi);
  return p;
}

inline double Grid6(std::mt19937_64& rng, int range) {
  return UniformInt(rng, -range * 1000000, range * 1000000) / 1e6;
}

inline Instruction RandomInstruction(std::mt19937_64& rng) {
  static const char* const kSpecs[] = {
      "takeoff:height=3",          "translate:distance=5,heading=90", "rotate:angle=-45",
      "dive:distance=2.5",         "approach:target=car1",            "orbit:target=tree2,radius=3,side=left",
      "passside:target=p1,side=right", "flybetween:target=a,target2=b", "hoverbeside:target=m,side=left",
      "facetarget:target=gate 3"};
  Instruction ins = ParseTaskSpec(kSpecs[UniformInt(rng, 0, 9)]);
  if (UniformInt(rng, 0, 1) == 1) {
    ins.form = InstructionForm::kOpenVocabulary;
    ins.text = "please\tdo it 100% = now #" + std::to_string(UniformInt(rng, 0, 999));
  }
  return ins;
}

inline Episode RandomEpisode(std::mt19937_64& rng) {
  Episode e;
  e.id = "ep-" + std::to_string(UniformInt(rng, 0, 99999));
  e.instruction = RandomInstruction(rng);
  e.source = static_cast<EpisodeSource>(UniformInt(rng, 0, 2));
  if (UniformInt(rng, 0, 1) == 1) {
    GeoPose o;
    o.lat = UniformInt(rng, -80000000, 80000000) / 1e6;
    o.lon = UniformInt(rng, -179000000, 179000000) / 1e6;
    o.alt = Grid6(rng, 100);
    o.yaw = DegToRad(UniformInt(rng, -179000000, 180000000) / 1e6);
    e.origin = o;
  }
  const int n = UniformInt(rng, 2, 30);
  for (int k = 0; k < n; ++k) {
    Frame f;
    f.t = k / 5.0;
    if (k > 0) {
      f.pose.x = Grid6(rng, 20);
      f.pose.y = Grid6(rng, 20);
      f.pose.z = Grid6(rng, 20);
      f.pose.roll = DegToRad(UniformInt(rng, -30000000, 30000000) / 1e6);
      f.pose.pitch = DegToRad(UniformInt(rng, -30000000, 30000000) / 1e6);
      f.pose.yaw = DegToRad(UniformInt(rng, -179999999, 180000000) / 1e6);
    }
    f.obs_ref = UniformInt(rng, 0, 3) == 0 ? "" : "frames/img " + std::to_string(k) + ".png";
    e.frames.push_back(f);
  }
  return e;
}

inline UavState RandomState(std::mt19937_64& rng) {
  UavState s;
  s.t = Uniform(rng, 0.0, 100.0);
  s.pose = RandomPose(rng);
  for (auto& v : s.velocity) v = Uniform(rng, -2.0, 2.0);
  return s;
}

inline std::string RandomText(std::mt19937_64& rng, int max_len = 24) {
  std::string s;
  const int n = UniformInt(rng, 0, max_len);
  for (int i = 0; i < n; ++i) s += static_cast<char>(UniformInt(rng, 1, 255));
  return s;
}

inline ActionChunk RandomChunk(std::mt19937_64& rng) {
  ActionChunk c;
  c.t_inf = Uniform(rng, 0.0, 100.0);
  c.anchor = RandomState(rng);
  c.step_dt = Uniform(rng, 0.05, 0.5);
  const int n = UniformInt(rng, 0, static_cast<int>(kMaxChunkTargets));
  for (int i = 0; i < n; ++i) c.targets.push_back(RandomPose(rng, 3.0));
  return c;
}

inline BridgeMessage RandomMessage(std::mt19937_64& rng) {
  switch (UniformInt(rng, 0, 6)) {
    case 0:
      return TelemetryMsg{Uniform(rng, 0.0, 1e4), RandomState(rng)};
    case 1:
      return FrameMetaMsg{Uniform(rng, 0.0, 1e4), RandomText(rng)};
    case 2:
      return InstructionStartMsg{RandomText(rng, 8), RandomText(rng, 80)};
    case 3:
      return ChunkCmdMsg{RandomChunk(rng)};
    case 4:
      return AbortMsg{RandomText(rng, 8)};
    case 5:
      return AckMsg{RandomText(rng)};
    default: {
      RemoteQueryMsg q;
      q.t = Uniform(rng, 0.0, 1e4);
      q.state = RandomState(rng);
      q.obs.pose = q.state.pose;
      const int n = UniformInt(rng, 0, 5);
      for (int i = 0; i < n; ++i) {
        q.obs.visible.push_back(VisibleObject{RandomText(rng, 6), static_cast<ObjectClass>(UniformInt(rng, 0, 5)),
                                              Uniform(rng, -0.7, 0.7), Uniform(rng, -1.0, 1.0),
                                              Uniform(rng, 0.0, 60.0)});
      }
      q.instruction = RandomText(rng, 60);
      return q;
    }
  }
}

}  // namespace flowbench::testing

#endif  // FLOWBENCH_TESTS_SUPPORT_H_
