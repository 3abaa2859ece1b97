#include "flowbench/ingest.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

#include "flowbench/error.h"

namespace flowbench {
namespace {

constexpr double kTieSeconds = 1e-9;  // frame distances closer than this count as a tie

std::vector<std::string_view> SplitLines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  return lines;
}

std::vector<std::string_view> SplitCsv(std::string_view line, std::size_t max_fields) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (out.size() + 1 < max_fields) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) break;
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  out.push_back(line.substr(start));
  return out;
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

double CsvNumber(std::string_view field, int line, const char* what) {
  std::string tmp(Trim(field));
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::kParseError, fmt::format("bad {} '{}'", what, field), line);
  }
  return v;
}

bool SkippableLine(std::string_view line) {
  line = Trim(line);
  return line.empty() || line.front() == '#';
}

}  // namespace

StateLog ParseFlightLog(std::string_view csv) {
  StateLog log;
  const auto lines = SplitLines(csv);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int line_no = static_cast<int>(i) + 1;
    const std::string_view line = lines[i];
    if (SkippableLine(line)) continue;
    if (log.samples.empty() && Trim(line).starts_with("t_wall")) continue;
    const auto f = SplitCsv(line, 7);
    if (f.size() != 7) {
      throw Error(ErrorCode::kParseError, fmt::format("expected 7 fields, got {}", f.size()), line_no);
    }
    StateSample s;
    s.t_wall = CsvNumber(f[0], line_no, "timestamp");
    s.pose.lat = CsvNumber(f[1], line_no, "latitude");
    s.pose.lon = CsvNumber(f[2], line_no, "longitude");
    s.pose.alt = CsvNumber(f[3], line_no, "altitude");
    s.pose.roll = WrapAngle(DegToRad(CsvNumber(f[4], line_no, "roll")));
    s.pose.pitch = WrapAngle(DegToRad(CsvNumber(f[5], line_no, "pitch")));
    s.pose.yaw = WrapAngle(DegToRad(CsvNumber(f[6], line_no, "yaw")));
    if (s.pose.lat < -90.0 || s.pose.lat > 90.0) {
      throw Error(ErrorCode::kParseError, fmt::format("latitude {} outside [-90, 90]", s.pose.lat), line_no);
    }
    if (s.pose.lon <= -180.0 || s.pose.lon > 180.0) {
      throw Error(ErrorCode::kParseError, fmt::format("longitude {} outside (-180, 180]", s.pose.lon), line_no);
    }
    if (!log.samples.empty() && s.t_wall <= log.samples.back().t_wall) {
      throw Error(ErrorCode::kNonMonotoneTimestamp,
                  fmt::format("timestamp {} does not follow {}", s.t_wall, log.samples.back().t_wall), line_no);
    }
    log.samples.push_back(s);
  }
  if (log.samples.size() < 2) throw Error(ErrorCode::kParseError, "flight log needs at least 2 samples");
  return log;
}

FrameIndex ParseFrameIndex(std::string_view csv) {
  FrameIndex index;
  const auto lines = SplitLines(csv);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int line_no = static_cast<int>(i) + 1;
    const std::string_view line = lines[i];
    if (SkippableLine(line)) continue;
    if (index.entries.empty() && Trim(line).starts_with("t_wall")) continue;
    const auto f = SplitCsv(line, 2);
    if (f.size() != 2) throw Error(ErrorCode::kParseError, "expected `t_wall,obs_ref`", line_no);
    FrameIndexEntry entry{CsvNumber(f[0], line_no, "timestamp"), std::string(Trim(f[1]))};
    if (!index.entries.empty() && entry.t_wall <= index.entries.back().t_wall) {
      throw Error(ErrorCode::kNonMonotoneTimestamp,
                  fmt::format("timestamp {} does not follow {}", entry.t_wall, index.entries.back().t_wall),
                  line_no);
    }
    index.entries.push_back(std::move(entry));
  }
  return index;
}

GeoPose InterpolateState(const StateLog& log, double t) {
  const auto& s = log.samples;
  if (s.empty() || !(t >= s.front().t_wall && t <= s.back().t_wall)) {
    throw Error(ErrorCode::kOutOfRange, fmt::format("time {} outside the flight log", t));
  }
  auto it = std::upper_bound(s.begin(), s.end(), t,
                             [](double value, const StateSample& x) { return value < x.t_wall; });
  // it points past the last sample with t_wall <= t.
  const StateSample& a = *(it - 1);
  if (a.t_wall == t || it == s.end()) return a.pose;
  const StateSample& b = *it;
  const double f = (t - a.t_wall) / (b.t_wall - a.t_wall);
  GeoPose out;
  out.lat = a.pose.lat + f * (b.pose.lat - a.pose.lat);
  double dlon = std::remainder(b.pose.lon - a.pose.lon, 360.0);
  out.lon = a.pose.lon + f * dlon;
  if (out.lon > 180.0) out.lon -= 360.0;
  if (out.lon <= -180.0) out.lon += 360.0;
  out.alt = a.pose.alt + f * (b.pose.alt - a.pose.alt);
  out.roll = InterpAngle(a.pose.roll, b.pose.roll, f);
  out.pitch = InterpAngle(a.pose.pitch, b.pose.pitch, f);
  out.yaw = InterpAngle(a.pose.yaw, b.pose.yaw, f);
  return out;
}

namespace {

// Position at `t` interpolated between the bracketing samples after
// projecting them onto the tangent plane of `plane`.
LocalPose ProjectedPosition(const StateLog& log, const GeoPose& plane, double t) {
  const auto& s = log.samples;
  auto it = std::upper_bound(s.begin(), s.end(), t,
                             [](double value, const StateSample& x) { return value < x.t_wall; });
  const StateSample& a = *(it - 1);
  const LocalPose pa = GpsToLocal(plane, a.pose);
  if (a.t_wall == t || it == s.end()) return pa;
  const LocalPose pb = GpsToLocal(plane, it->pose);
  const double f = (t - a.t_wall) / (it->t_wall - a.t_wall);
  LocalPose out;
  out.x = pa.x + f * (pb.x - pa.x);
  out.y = pa.y + f * (pb.y - pa.y);
  out.z = pa.z + f * (pb.z - pa.z);
  return out;
}

}  // namespace

Episode AlignAndResample(const StateLog& log, const FrameIndex& frames, const Instruction& instruction,
                         std::string id, double rate_hz) {
  if (!(rate_hz > 0.0)) throw Error(ErrorCode::kOutOfRange, "resampling rate must be positive");
  if (log.samples.empty() || frames.entries.empty()) {
    throw Error(ErrorCode::kNoOverlap, "log or frame index is empty");
  }
  const double t0 = std::max(log.samples.front().t_wall, frames.entries.front().t_wall);
  const double t1 = std::min(log.samples.back().t_wall, frames.entries.back().t_wall);
  if (t1 - t0 < kMinOverlapSeconds) {
    throw Error(ErrorCode::kNoOverlap,
                fmt::format("log and frames overlap for {} s, need {} s", std::max(0.0, t1 - t0), kMinOverlapSeconds));
  }
  const auto count = static_cast<std::size_t>(std::floor((t1 - t0) * rate_hz + 1e-9)) + 1;

  Episode e;
  e.id = std::move(id);
  e.instruction = instruction;
  e.source = EpisodeSource::kRealLog;
  const auto& entries = frames.entries;
  // Positions are projected on the tangent plane of the first log sample and
  // then shifted to the first grid pose, so relative offsets stay linear.
  const GeoPose plane = log.samples.front().pose;
  GeoPose origin;
  LocalPose base;
  for (std::size_t k = 0; k < count; ++k) {
    const double rel = static_cast<double>(k) / rate_hz;
    const double wall = std::min(t0 + rel, t1);
    const GeoPose global = InterpolateState(log, wall);
    const LocalPose projected = ProjectedPosition(log, plane, wall);
    if (k == 0) {
      origin = global;
      base = projected;
    }

    auto it = std::lower_bound(entries.begin(), entries.end(), wall,
                               [](const FrameIndexEntry& x, double value) { return x.t_wall < value; });
    if (it == entries.end()) {
      --it;
    } else if (it != entries.begin() && (wall - (it - 1)->t_wall) <= (it->t_wall - wall) + kTieSeconds) {
      --it;
    }
    LocalPose pose = GpsToLocal(origin, global);
    pose.x = projected.x - base.x;
    pose.y = projected.y - base.y;
    pose.z = projected.z - base.z;
    e.frames.push_back(Frame{rel, pose, it->obs_ref});
  }
  e.origin = origin;
  return e;
}

Episode RecenterEpisode(Episode e) {
  if (e.frames.empty()) return e;
  const LocalPose base = e.frames.front().pose;
  if (base == LocalPose{}) return e;
  for (Frame& f : e.frames) {
    LocalPose& p = f.pose;
    p.x -= base.x;
    p.y -= base.y;
    p.z -= base.z;
    p.roll = AngleDiff(base.roll, p.roll);
    p.pitch = AngleDiff(base.pitch, p.pitch);
    p.yaw = AngleDiff(base.yaw, p.yaw);
  }
  e.frames.front().pose = LocalPose{};
  if (e.origin) e.origin = LocalToGps(*e.origin, base);
  return e;
}

}  // namespace flowbench
