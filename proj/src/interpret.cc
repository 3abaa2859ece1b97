#include "flowbench/interpret.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <string>

#include <fmt/format.h>

#include "flowbench/error.h"

namespace flowbench {
namespace {

std::string Normalize(std::string_view text) {
  std::string out;
  bool space = false;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(u));
  }
  while (!out.empty() && (out.back() == '.' || out.back() == '!')) out.pop_back();
  return out;
}

double Horizontal(const LocalPose& p, const SceneObject& o) {
  return std::hypot(o.position[0] - p.x, o.position[1] - p.y);
}

// Objects matching a noun ("object", a class name or an id), visible first,
// each group ordered by horizontal range.
std::vector<const SceneObject*> Candidates(const std::string& noun, const World& w, const SimConfig& cfg) {
  std::vector<const SceneObject*> matches;
  for (const auto& o : w.spec.objects) {
    if (o.id == noun) return {&o};
  }
  std::string singular = noun;
  if (singular.size() > 1 && singular.back() == 's') singular.pop_back();
  for (const auto& o : w.spec.objects) {
    const std::string cls(ObjectClassName(o.cls));
    if (noun == "object" || singular == "object" || cls == noun || cls == singular) matches.push_back(&o);
  }
  const Observation obs = Observe(w, cfg);
  auto visible = [&](const SceneObject* o) {
    return std::any_of(obs.visible.begin(), obs.visible.end(), [&](const VisibleObject& v) { return v.id == o->id; });
  };
  std::stable_sort(matches.begin(), matches.end(), [&](const SceneObject* a, const SceneObject* b) {
    const bool va = visible(a), vb = visible(b);
    if (va != vb) return va;
    return Horizontal(w.uav.pose, *a) < Horizontal(w.uav.pose, *b);
  });
  return matches;
}

std::string Resolve(const std::string& noun, const World& w, const SimConfig& cfg) {
  const auto c = Candidates(noun, w, cfg);
  if (c.empty()) throw Error(ErrorCode::kUnresolvedTarget, fmt::format("no object matches '{}'", noun));
  return c.front()->id;
}

double Number(const std::string& s) { return std::stod(s); }

}  // namespace

Instruction InterpretInstruction(std::string_view raw, const World& w, const SimConfig& cfg) {
  const std::string text = Normalize(raw);
  if (text.empty()) throw Error(ErrorCode::kUnsupportedTask, "empty instruction");

  const auto colon = text.find(':');
  if (colon != std::string::npos && ParseTaskType(text.substr(0, colon))) {
    Instruction ins = ParseTaskSpec(std::string(raw.substr(raw.find_first_not_of(" \t"))));
    for (const auto* id : {&ins.params.target, &ins.params.target2}) {
      if (*id) RequireObject(w.spec, *id);
    }
    return ins;
  }

  static const std::string kNum = R"(([0-9]+(?:\.[0-9]+)?))";
  static const std::string kNoun = R"((?:the )?([a-z0-9_\-]+))";
  static const std::regex kTakeoff("(?:take off and )?(?:ascend|climb|rise|go up) " + kNum + " (?:meters?|m)");
  static const std::regex kTakeoffOnly("take off " + kNum + " (?:meters?|m)");
  static const std::regex kDive("(?:dive|descend|go) down " + kNum + " (?:meters?|m)");
  static const std::regex kTurn("turn (left|right) " + kNum + " degrees?");
  static const std::regex kMove("(?:move|fly|go) " + kNum +
                                " (?:meters?|m) (forward|backward|left|right|toward heading (-?[0-9]+(?:\\.[0-9]+)?) degrees?)");
  static const std::regex kOrbit("(?:orbit|circle)(?: around)? " + kNoun + "(?: at a radius of " + kNum +
                                 " (?:meters?|m))?(?: (clockwise|counterclockwise))?");
  static const std::regex kPass("(?:fly|pass) (?:through|by) the (left|right) side of " + kNoun);
  static const std::regex kBetween("(?:fly|pass) between (?:the )?(?:two )?([a-z0-9_\\-]+)(?: and (?:the )?([a-z0-9_\\-]+))?");
  static const std::regex kHover("hover (?:on|at) the (left|right) side of " + kNoun);
  static const std::regex kFace("(?:turn to )?face " + kNoun);
  static const std::regex kApproach("(?:approach|fly to|go to) " + kNoun);

  std::smatch m;
  InstructionParams p;
  TaskType type;
  if (std::regex_match(text, m, kTakeoff) || std::regex_match(text, m, kTakeoffOnly)) {
    type = TaskType::kTakeoff;
    p.distance = Number(m[1]);
  } else if (std::regex_match(text, m, kDive)) {
    type = TaskType::kDive;
    p.distance = Number(m[1]);
  } else if (std::regex_match(text, m, kTurn)) {
    type = TaskType::kRotate;
    p.angle = DegToRad(Number(m[2])) * (m[1] == "left" ? 1.0 : -1.0);
  } else if (std::regex_match(text, m, kMove)) {
    type = TaskType::kTranslate;
    p.distance = Number(m[1]);
    const std::string dir = m[2];
    if (dir == "forward") p.angle = 0.0;
    else if (dir == "left") p.angle = kPi / 2;
    else if (dir == "backward") p.angle = kPi;
    else if (dir == "right") p.angle = -kPi / 2;
    else p.angle = DegToRad(Number(m[3]));
  } else if (std::regex_match(text, m, kOrbit)) {
    type = TaskType::kOrbit;
    p.target = Resolve(m[1], w, cfg);
    if (m[2].matched) p.distance = Number(m[2]);
    if (m[3].matched) p.side = m[3] == "clockwise" ? Side::kLeft : Side::kRight;
  } else if (std::regex_match(text, m, kPass)) {
    type = TaskType::kPassSide;
    p.side = *ParseSide(m[1].str());
    p.target = Resolve(m[2], w, cfg);
  } else if (std::regex_match(text, m, kBetween)) {
    type = TaskType::kFlyBetween;
    if (m[2].matched) {
      p.target = Resolve(m[1], w, cfg);
      p.target2 = Resolve(m[2], w, cfg);
    } else {
      const auto c = Candidates(m[1], w, cfg);
      if (c.size() < 2) throw Error(ErrorCode::kUnresolvedTarget, fmt::format("need two objects for '{}'", text));
      p.target = c[0]->id;
      p.target2 = c[1]->id;
    }
    if (p.target == p.target2) throw Error(ErrorCode::kUnresolvedTarget, "fly between needs two distinct objects");
  } else if (std::regex_match(text, m, kHover)) {
    type = TaskType::kHoverBeside;
    p.side = *ParseSide(m[1].str());
    p.target = Resolve(m[2], w, cfg);
  } else if (std::regex_match(text, m, kFace)) {
    type = TaskType::kFaceTarget;
    p.target = Resolve(m[1], w, cfg);
  } else if (std::regex_match(text, m, kApproach)) {
    type = TaskType::kApproach;
    p.target = Resolve(m[1], w, cfg);
  } else {
    throw Error(ErrorCode::kUnsupportedTask, fmt::format("cannot interpret '{}'", std::string(raw)));
  }
  Instruction ins = MakeFixedInstruction(type, std::move(p));
  if (ins.text != text) {
    ins.text = std::string(raw);
    ins.form = InstructionForm::kOpenVocabulary;
  }
  const auto violations = CheckInstruction(ins);
  if (!violations.empty()) throw Error(ErrorCode::kUnsupportedTask, violations.front().message);
  return ins;
}

}  // namespace flowbench
