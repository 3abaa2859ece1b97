#include "flowbench/datamodel.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

#include "flowbench/error.h"

namespace flowbench {
namespace {

constexpr std::string_view kEpisodeMagic = "FLOWEP/1";

enum ParamBit : unsigned {
  kDistance = 1u << 0,
  kAngle = 1u << 1,
  kSide = 1u << 2,
  kTarget = 1u << 3,
  kTarget2 = 1u << 4,
};

struct ParamRule {
  unsigned required;
  unsigned allowed;
};

ParamRule RuleFor(TaskType t) {
  switch (t) {
    case TaskType::kTakeoff: return {kDistance, kDistance};
    case TaskType::kTranslate: return {kDistance | kAngle, kDistance | kAngle};
    case TaskType::kRotate: return {kAngle, kAngle};
    case TaskType::kDive: return {kDistance, kDistance};
    case TaskType::kApproach: return {kTarget, kTarget};
    case TaskType::kOrbit: return {kTarget, kTarget | kDistance | kSide};
    case TaskType::kPassSide: return {kTarget | kSide, kTarget | kSide};
    case TaskType::kFlyBetween: return {kTarget | kTarget2, kTarget | kTarget2};
    case TaskType::kHoverBeside: return {kTarget | kSide, kTarget | kSide};
    case TaskType::kFaceTarget: return {kTarget, kTarget};
  }
  return {0, 0};
}

unsigned PresentBits(const InstructionParams& p) {
  unsigned bits = 0;
  if (p.distance) bits |= kDistance;
  if (p.angle) bits |= kAngle;
  if (p.side) bits |= kSide;
  if (p.target) bits |= kTarget;
  if (p.target2) bits |= kTarget2;
  return bits;
}

std::string Lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool Near(double a, double b) { return std::abs(a - b) < 1e-9; }

std::string TranslateDirection(double angle) {
  const double a = WrapAngle(angle);
  if (Near(a, 0.0)) return "forward";
  if (Near(a, kPi / 2)) return "left";
  if (Near(std::abs(a), kPi)) return "backward";
  if (Near(a, -kPi / 2)) return "right";
  return fmt::format("toward heading {} degrees", FormatNumber(RadToDeg(a)));
}

// Fixed 6-decimal rendering; negative zero prints as zero.
std::string Fixed6(double v) {
  std::string s = fmt::format("{:.6f}", v);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::string Fixed9(double v) {
  std::string s = fmt::format("{:.9f}", v);
  if (s == "-0.000000000") s = "0.000000000";
  return s;
}

std::optional<double> ParseDouble(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::vector<std::string_view> Split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

bool IsAngleInRange(double a) { return a > -kPi && a <= kPi; }

}  // namespace

std::string_view TaskTypeName(TaskType t) {
  switch (t) {
    case TaskType::kTakeoff: return "Takeoff";
    case TaskType::kTranslate: return "Translate";
    case TaskType::kRotate: return "Rotate";
    case TaskType::kDive: return "Dive";
    case TaskType::kApproach: return "Approach";
    case TaskType::kOrbit: return "Orbit";
    case TaskType::kPassSide: return "PassSide";
    case TaskType::kFlyBetween: return "FlyBetween";
    case TaskType::kHoverBeside: return "HoverBeside";
    case TaskType::kFaceTarget: return "FaceTarget";
  }
  return "?";
}

std::optional<TaskType> ParseTaskType(std::string_view name) {
  const std::string lower = Lower(name);
  for (TaskType t : kAllTaskTypes) {
    if (Lower(TaskTypeName(t)) == lower) return t;
  }
  return std::nullopt;
}

std::string_view FormName(InstructionForm f) {
  return f == InstructionForm::kFixed ? "Fixed" : "OpenVocabulary";
}

std::optional<InstructionForm> ParseForm(std::string_view name) {
  const std::string lower = Lower(name);
  if (lower == "fixed") return InstructionForm::kFixed;
  if (lower == "openvocabulary" || lower == "open") return InstructionForm::kOpenVocabulary;
  return std::nullopt;
}

std::string_view SideName(Side s) { return s == Side::kLeft ? "left" : "right"; }

std::optional<Side> ParseSide(std::string_view name) {
  const std::string lower = Lower(name);
  if (lower == "left") return Side::kLeft;
  if (lower == "right") return Side::kRight;
  return std::nullopt;
}

std::string_view SourceName(EpisodeSource s) {
  switch (s) {
    case EpisodeSource::kRealLog: return "RealLog";
    case EpisodeSource::kSimManual: return "SimManual";
    case EpisodeSource::kSimRuleBased: return "SimRuleBased";
  }
  return "?";
}

std::optional<EpisodeSource> ParseSource(std::string_view name) {
  for (EpisodeSource s : {EpisodeSource::kRealLog, EpisodeSource::kSimManual,
                          EpisodeSource::kSimRuleBased}) {
    if (SourceName(s) == name) return s;
  }
  return std::nullopt;
}

bool IsObjectTask(TaskType t) { return (RuleFor(t).required & kTarget) != 0; }

std::string FormatNumber(double v) {
  std::string s = fmt::format("{:.3f}", v);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

std::string RenderFixedText(TaskType type, const InstructionParams& p) {
  const double distance = p.distance.value_or(0.0);
  const double angle = p.angle.value_or(0.0);
  const std::string side = p.side ? std::string(SideName(*p.side)) : "left";
  switch (type) {
    case TaskType::kTakeoff:
      return fmt::format("take off and ascend {} meters", FormatNumber(distance));
    case TaskType::kTranslate:
      return fmt::format("move {} meters {}", FormatNumber(distance), TranslateDirection(angle));
    case TaskType::kRotate:
      return fmt::format("turn {} {} degrees", angle >= 0 ? "left" : "right",
                         FormatNumber(RadToDeg(std::abs(angle))));
    case TaskType::kDive:
      return fmt::format("dive down {} meters", FormatNumber(distance));
    case TaskType::kApproach:
      return "approach the object";
    case TaskType::kOrbit: {
      std::string text = "orbit around the object";
      if (p.distance) text += fmt::format(" at a radius of {} meters", FormatNumber(distance));
      if (p.side) text += *p.side == Side::kLeft ? " clockwise" : " counterclockwise";
      return text;
    }
    case TaskType::kPassSide:
      return fmt::format("fly through the {} side of the object", side);
    case TaskType::kFlyBetween:
      return "fly between the two objects";
    case TaskType::kHoverBeside:
      return fmt::format("hover on the {} side of the object", side);
    case TaskType::kFaceTarget:
      return "turn to face the object";
  }
  return {};
}

Instruction MakeFixedInstruction(TaskType type, InstructionParams params) {
  Instruction ins;
  ins.task_type = type;
  ins.form = InstructionForm::kFixed;
  ins.text = RenderFixedText(type, params);
  ins.params = std::move(params);
  return ins;
}

std::vector<Violation> CheckInstruction(const Instruction& ins) {
  std::vector<Violation> out;
  if (ins.text.empty()) out.push_back({"text", "instruction text is empty"});
  const ParamRule rule = RuleFor(ins.task_type);
  const unsigned present = PresentBits(ins.params);
  if ((present & rule.required) != rule.required) {
    out.push_back({"params", fmt::format("{} is missing required parameters", TaskTypeName(ins.task_type))});
  }
  if ((present & ~rule.allowed) != 0) {
    out.push_back({"params", fmt::format("{} has unexpected parameters", TaskTypeName(ins.task_type))});
  }
  const auto& p = ins.params;
  if (p.distance && !(std::isfinite(*p.distance) && *p.distance > 0)) {
    out.push_back({"params", "distance must be positive"});
  }
  if (p.angle && !std::isfinite(*p.angle)) out.push_back({"params", "angle must be finite"});
  if (ins.task_type == TaskType::kRotate && p.angle && *p.angle == 0.0) {
    out.push_back({"params", "rotation angle must be non-zero"});
  }
  if (p.target && p.target->empty()) out.push_back({"params", "target id is empty"});
  if (p.target2 && p.target2->empty()) out.push_back({"params", "second target id is empty"});
  if (ins.form == InstructionForm::kFixed && out.empty() &&
      ins.text != RenderFixedText(ins.task_type, ins.params)) {
    out.push_back({"text", "fixed-form text differs from the canonical template"});
  }
  return out;
}

double PathLength(const std::vector<Frame>& frames) {
  double total = 0.0;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const auto& a = frames[i - 1].pose;
    const auto& b = frames[i].pose;
    total += std::hypot(b.x - a.x, b.y - a.y, b.z - a.z);
  }
  return total;
}

std::vector<Violation> CheckEpisodeInvariants(const Episode& e) {
  std::vector<Violation> out;
  if (e.id.empty()) out.push_back({"id", "episode id is empty"});
  for (auto& v : CheckInstruction(e.instruction)) out.push_back(std::move(v));
  if (e.origin) {
    try {
      ValidateGeoPose(*e.origin);
    } catch (const Error& err) {
      out.push_back({"origin", err.detail()});
    }
  }
  if (e.frames.size() < 2) {
    out.push_back({"frames", "frame count < 2"});
  }
  if (!e.frames.empty() && !(e.frames.front().pose == LocalPose{})) {
    out.push_back({"origin", "first frame pose is not the origin"});
  }
  for (std::size_t i = 0; i < e.frames.size(); ++i) {
    const Frame& f = e.frames[i];
    const auto& p = f.pose;
    if (!(std::isfinite(f.t) && std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z))) {
      out.push_back({"pose", fmt::format("frame {} has non-finite values", i)});
      continue;
    }
    if (!(IsAngleInRange(p.roll) && IsAngleInRange(p.pitch) && IsAngleInRange(p.yaw))) {
      out.push_back({"pose", fmt::format("frame {} attitude outside (-pi, pi]", i)});
    }
    if (f.t < 0.0) out.push_back({"t", fmt::format("frame {} has negative time", i)});
    if (i == 0) continue;
    const double dt = f.t - e.frames[i - 1].t;
    if (dt <= 0.0) {
      out.push_back({"t order", fmt::format("frame {} time {} not after {}", i, f.t, e.frames[i - 1].t)});
    } else if (std::abs(dt - kFrameDt) > kFrameDtTolerance) {
      out.push_back({"spacing", fmt::format("frame {} spacing {} != 0.2", i, dt)});
    }
  }
  return out;
}

std::vector<Violation> ValidateEpisode(const Episode& e, const ValidationLimits& limits) {
  std::vector<Violation> out = CheckEpisodeInvariants(e);
  const double bound = limits.v_max * kFrameDt * 1.5;
  for (std::size_t i = 1; i < e.frames.size(); ++i) {
    const auto& a = e.frames[i - 1].pose;
    const auto& b = e.frames[i].pose;
    const double step = std::hypot(b.x - a.x, b.y - a.y, b.z - a.z);
    if (step > bound) {
      out.push_back({"step", fmt::format("step displacement {} > {}", FormatNumber(step), FormatNumber(bound))});
    }
  }
  const double length = PathLength(e.frames);
  if (length > limits.max_path_length) {
    out.push_back({"path", fmt::format("path length {} > {}", FormatNumber(length),
                                       FormatNumber(limits.max_path_length))});
  }
  return out;
}

std::string PercentEscape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '%': out += "%25"; break;
      case ' ': out += "%20"; break;
      case '\t': out += "%09"; break;
      case '\n': out += "%0A"; break;
      case '\r': out += "%0D"; break;
      default: out += c;
    }
  }
  return out;
}

std::string PercentUnescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      unsigned value = 0;
      auto [ptr, ec] = std::from_chars(s.data() + i + 1, s.data() + i + 3, value, 16);
      if (ec == std::errc() && ptr == s.data() + i + 3) {
        out += static_cast<char>(value);
        i += 2;
        continue;
      }
    }
    out += s[i];
  }
  return out;
}

namespace {

// "-" encodes an empty reference, so a literal "-" is escaped.
std::string ObsRefField(const std::string& ref) {
  if (ref.empty()) return "-";
  if (ref == "-") return "%2D";
  return PercentEscape(ref);
}

}  // namespace

std::string SerializeEpisode(const Episode& e) {
  const auto violations = CheckEpisodeInvariants(e);
  if (!violations.empty()) {
    throw Error(ErrorCode::kInvariantViolation, violations.front().field);
  }
  const auto& ins = e.instruction;
  const auto& p = ins.params;
  std::string out(kEpisodeMagic);
  out += "\tid=" + PercentEscape(e.id);
  out += "\ttask=" + std::string(TaskTypeName(ins.task_type));
  out += "\tform=" + std::string(FormName(ins.form));
  out += "\tsource=" + std::string(SourceName(e.source));
  if (e.origin) {
    const GeoPose& o = *e.origin;
    out += fmt::format("\torigin={},{},{},{},{},{}", Fixed9(o.lat), Fixed9(o.lon), Fixed6(o.alt),
                       Fixed6(RadToDeg(o.roll)), Fixed6(RadToDeg(o.pitch)), Fixed6(RadToDeg(o.yaw)));
  } else {
    out += "\torigin=none";
  }
  if (p.distance) out += "\tdistance=" + Fixed6(*p.distance);
  if (p.angle) out += "\tangle_deg=" + Fixed6(RadToDeg(*p.angle));
  if (p.side) out += "\tside=" + std::string(SideName(*p.side));
  if (p.target) out += "\ttarget=" + PercentEscape(*p.target);
  if (p.target2) out += "\ttarget2=" + PercentEscape(*p.target2);
  out += "\ttext=" + PercentEscape(ins.text);
  out += '\n';
  for (const Frame& f : e.frames) {
    const auto& q = f.pose;
    out += fmt::format("{} {} {} {} {} {} {} {}\n", Fixed6(f.t), Fixed6(q.x), Fixed6(q.y), Fixed6(q.z),
                       Fixed6(RadToDeg(q.roll)), Fixed6(RadToDeg(q.pitch)), Fixed6(RadToDeg(q.yaw)),
                       ObsRefField(f.obs_ref));
  }
  return out;
}

namespace {

[[noreturn]] void ParseFail(int line, const std::string& reason) {
  throw Error(ErrorCode::kParseError, reason, line);
}

double ParseField(std::string_view s, int line, const char* what) {
  auto v = ParseDouble(s);
  if (!v) ParseFail(line, fmt::format("bad {} '{}'", what, s));
  return *v;
}

// Attitude read from a file in degrees, wrapped into (-pi, pi].
double ParseAngleDeg(std::string_view s, int line, const char* what) {
  return WrapAngle(DegToRad(ParseField(s, line, what)));
}

void ParseHeader(std::string_view line, Episode& e) {
  const auto fields = Split(line, '\t');
  if (fields.empty() || fields[0] != kEpisodeMagic) ParseFail(1, "missing FLOWEP/1 header");
  bool have_id = false, have_task = false, have_form = false, have_source = false, have_text = false;
  for (std::size_t i = 1; i < fields.size(); ++i) {
    const auto eq = fields[i].find('=');
    if (eq == std::string_view::npos) ParseFail(1, fmt::format("header field '{}' lacks '='", fields[i]));
    const std::string_view key = fields[i].substr(0, eq);
    const std::string_view value = fields[i].substr(eq + 1);
    auto& p = e.instruction.params;
    if (key == "id") {
      e.id = PercentUnescape(value);
      have_id = true;
    } else if (key == "task") {
      auto t = ParseTaskType(value);
      if (!t) ParseFail(1, fmt::format("unknown task type '{}'", value));
      e.instruction.task_type = *t;
      have_task = true;
    } else if (key == "form") {
      auto f = ParseForm(value);
      if (!f) ParseFail(1, fmt::format("unknown form '{}'", value));
      e.instruction.form = *f;
      have_form = true;
    } else if (key == "source") {
      auto s = ParseSource(value);
      if (!s) ParseFail(1, fmt::format("unknown source '{}'", value));
      e.source = *s;
      have_source = true;
    } else if (key == "origin") {
      if (value == "none") {
        e.origin.reset();
      } else {
        const auto parts = Split(value, ',');
        if (parts.size() != 6) ParseFail(1, "origin needs 6 components");
        GeoPose o;
        o.lat = ParseField(parts[0], 1, "origin latitude");
        o.lon = ParseField(parts[1], 1, "origin longitude");
        o.alt = ParseField(parts[2], 1, "origin altitude");
        o.roll = ParseAngleDeg(parts[3], 1, "origin roll");
        o.pitch = ParseAngleDeg(parts[4], 1, "origin pitch");
        o.yaw = ParseAngleDeg(parts[5], 1, "origin yaw");
        e.origin = o;
      }
    } else if (key == "distance") {
      p.distance = ParseField(value, 1, "distance");
    } else if (key == "angle_deg") {
      p.angle = DegToRad(ParseField(value, 1, "angle"));
    } else if (key == "side") {
      auto s = ParseSide(value);
      if (!s) ParseFail(1, fmt::format("unknown side '{}'", value));
      p.side = *s;
    } else if (key == "target") {
      p.target = PercentUnescape(value);
    } else if (key == "target2") {
      p.target2 = PercentUnescape(value);
    } else if (key == "text") {
      e.instruction.text = PercentUnescape(value);
      have_text = true;
    } else {
      ParseFail(1, fmt::format("unknown header key '{}'", key));
    }
  }
  if (!(have_id && have_task && have_form && have_source && have_text)) {
    ParseFail(1, "header lacks a required key (id, task, form, source, text)");
  }
}

}  // namespace

Episode DeserializeEpisode(std::string_view bytes) {
  Episode e;
  if (bytes.empty()) ParseFail(1, "empty input");
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < bytes.size()) {
    const std::size_t nl = bytes.find('\n', start);
    if (nl == std::string_view::npos) {
      ParseFail(static_cast<int>(lines.size()) + 1, "truncated line (no terminating newline)");
    }
    lines.push_back(bytes.substr(start, nl - start));
    start = nl + 1;
  }
  ParseHeader(lines[0], e);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const int line_no = static_cast<int>(i) + 1;
    const auto parts = Split(lines[i], ' ');
    if (parts.size() != 8) {
      ParseFail(line_no, fmt::format("frame record has {} fields, expected 8", parts.size()));
    }
    Frame f;
    f.t = ParseField(parts[0], line_no, "t");
    f.pose.x = ParseField(parts[1], line_no, "x");
    f.pose.y = ParseField(parts[2], line_no, "y");
    f.pose.z = ParseField(parts[3], line_no, "z");
    f.pose.roll = ParseAngleDeg(parts[4], line_no, "roll");
    f.pose.pitch = ParseAngleDeg(parts[5], line_no, "pitch");
    f.pose.yaw = ParseAngleDeg(parts[6], line_no, "yaw");
    f.obs_ref = parts[7] == "-" ? std::string() : PercentUnescape(parts[7]);
    e.frames.push_back(std::move(f));
  }
  const auto violations = CheckEpisodeInvariants(e);
  if (!violations.empty()) {
    throw Error(ErrorCode::kInvariantViolation, violations.front().field);
  }
  return e;
}

Instruction ParseTaskSpec(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string_view type_name = spec.substr(0, colon);
  auto type = ParseTaskType(type_name);
  if (!type) throw Error(ErrorCode::kParseError, fmt::format("unknown task type '{}'", type_name));
  InstructionParams params;
  if (colon != std::string_view::npos && colon + 1 < spec.size()) {
    for (std::string_view kv : Split(spec.substr(colon + 1), ',')) {
      const auto eq = kv.find('=');
      if (eq == std::string_view::npos) {
        throw Error(ErrorCode::kParseError, fmt::format("task parameter '{}' lacks '='", kv));
      }
      const std::string key = Lower(kv.substr(0, eq));
      const std::string_view value = kv.substr(eq + 1);
      auto number = [&]() {
        auto v = ParseDouble(value);
        if (!v) throw Error(ErrorCode::kParseError, fmt::format("bad number '{}' for {}", value, key));
        return *v;
      };
      if (key == "distance" || key == "height" || key == "radius") {
        params.distance = number();
      } else if (key == "angle" || key == "heading") {
        params.angle = DegToRad(number());
      } else if (key == "side") {
        auto s = ParseSide(value);
        if (!s) throw Error(ErrorCode::kParseError, fmt::format("bad side '{}'", value));
        params.side = *s;
      } else if (key == "target") {
        params.target = std::string(value);
      } else if (key == "target2") {
        params.target2 = std::string(value);
      } else {
        throw Error(ErrorCode::kParseError, fmt::format("unknown task parameter '{}'", key));
      }
    }
  }
  if (*type == TaskType::kTranslate && !params.angle) params.angle = 0.0;  // forward
  Instruction ins = MakeFixedInstruction(*type, std::move(params));
  const auto violations = CheckInstruction(ins);
  if (!violations.empty()) {
    throw Error(ErrorCode::kParseError, fmt::format("task '{}': {}", spec, violations.front().message));
  }
  return ins;
}

}  // namespace flowbench
