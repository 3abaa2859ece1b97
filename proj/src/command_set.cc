#include <cctype>
#include <cmath>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "flowbench/error.h"
#include "flowbench/ingest.h"

namespace flowbench {
namespace {

std::string TranslatePhrase(double angle) {
  // Reuse the canonical wording by rendering a probe instruction.
  InstructionParams p;
  p.distance = 1.0;
  p.angle = angle;
  const std::string text = RenderFixedText(TaskType::kTranslate, p);
  return text.substr(std::string("move 1 meters ").size());
}

void ReplaceAll(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

bool ContainsToken(const std::string& text, const std::string& token) {
  auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '.'; };
  std::size_t pos = 0;
  while ((pos = text.find(token, pos)) != std::string::npos) {
    const bool left_ok = pos == 0 || !is_word(text[pos - 1]);
    const std::size_t end = pos + token.size();
    // A trailing period ends a sentence rather than continuing a number.
    const bool right_ok = end == text.size() || !is_word(text[end]) ||
                          (text[end] == '.' && (end + 1 == text.size() || !std::isdigit(static_cast<unsigned char>(text[end + 1]))));
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

}  // namespace

CommandSet DefaultCommandSet() {
  CommandSet set;
  auto add = [&](TaskType t, std::string tmpl, std::vector<std::string> variants) {
    set.templates[t] = std::move(tmpl);
    set.variants[t] = std::move(variants);
  };
  add(TaskType::kTakeoff, "take off and ascend {distance} meters",
      {"ascend {distance} meters straight up", "climb vertically by {distance} meters",
       "rise {distance} meters into the air", "go up {distance} meters"});
  add(TaskType::kTranslate, "move {distance} meters {direction}",
      {"fly {distance} meters {direction}", "shift {direction} by {distance} meters",
       "travel {distance} meters {direction} while holding altitude"});
  add(TaskType::kRotate, "turn {turn} {angle} degrees",
      {"rotate {angle} degrees to the {turn}", "yaw {turn} by {angle} degrees",
       "spin {angle} degrees {turn} in place"});
  add(TaskType::kDive, "dive down {distance} meters",
      {"descend {distance} meters in a forward dive", "drop down {distance} meters while moving ahead",
       "swoop down {distance} meters"});
  add(TaskType::kApproach, "approach the object",
      {"fly toward the object and stop near it", "move closer to the object", "get close to the object"});
  add(TaskType::kOrbit, "orbit around the object{radius_clause}{orbit_dir}",
      {"circle around the object{radius_clause}{orbit_dir}",
       "fly a full loop around the object{radius_clause}{orbit_dir}",
       "make a complete circle around the object{radius_clause}{orbit_dir}"});
  add(TaskType::kPassSide, "fly through the {side} side of the object",
      {"pass the object on the {side} side", "go past the object keeping to its {side}",
       "fly by the {side} of the object"});
  add(TaskType::kFlyBetween, "fly between the two objects",
      {"pass through the gap between the two objects", "fly through the space between the objects",
       "go between the two objects"});
  add(TaskType::kHoverBeside, "hover on the {side} side of the object",
      {"hover to the {side} of the object", "stay in the air on the {side} side of the object",
       "move to the {side} of the object and hold there"});
  add(TaskType::kFaceTarget, "turn to face the object",
      {"turn toward the object", "rotate until the object is straight ahead", "point the camera at the object"});
  return set;
}

std::string RenderTemplate(std::string_view tmpl, const InstructionParams& p) {
  std::string s(tmpl);
  const double angle = p.angle.value_or(0.0);
  ReplaceAll(s, "{distance}", FormatNumber(p.distance.value_or(0.0)));
  ReplaceAll(s, "{angle}", FormatNumber(RadToDeg(std::abs(angle))));
  ReplaceAll(s, "{turn}", angle >= 0 ? "left" : "right");
  ReplaceAll(s, "{side}", p.side ? SideName(*p.side) : "left");
  ReplaceAll(s, "{direction}", TranslatePhrase(angle));
  ReplaceAll(s, "{radius_clause}",
             p.distance ? fmt::format(" at a radius of {} meters", FormatNumber(*p.distance)) : std::string());
  ReplaceAll(s, "{orbit_dir}",
             p.side ? (*p.side == Side::kLeft ? " clockwise" : " counterclockwise") : "");
  return s;
}

CommandSet ParseCommandSet(std::string_view text) {
  CommandSet set;
  int line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string_view::npos ? tab1 : line.find('\t', tab1 + 1);
    if (tab2 == std::string_view::npos) {
      throw Error(ErrorCode::kParseError, "expected `kind<TAB>task_type<TAB>text`", line_no);
    }
    const std::string_view kind = line.substr(0, tab1);
    const auto type = ParseTaskType(line.substr(tab1 + 1, tab2 - tab1 - 1));
    if (!type) throw Error(ErrorCode::kParseError, "unknown task type", line_no);
    std::string body(line.substr(tab2 + 1));
    if (body.empty()) throw Error(ErrorCode::kParseError, "empty text", line_no);
    if (kind == "template") {
      set.templates[*type] = std::move(body);
    } else if (kind == "variant") {
      set.variants[*type].push_back(std::move(body));
    } else {
      throw Error(ErrorCode::kParseError, fmt::format("unknown record kind '{}'", kind), line_no);
    }
  }
  for (TaskType t : kAllTaskTypes) {
    if (!set.templates.contains(t)) {
      throw Error(ErrorCode::kParseError, fmt::format("no fixed template for {}", TaskTypeName(t)));
    }
  }
  return set;
}

std::string SerializeCommandSet(const CommandSet& set) {
  std::string out;
  for (const auto& [type, tmpl] : set.templates) {
    out += fmt::format("template\t{}\t{}\n", TaskTypeName(type), tmpl);
  }
  for (const auto& [type, list] : set.variants) {
    for (const auto& v : list) out += fmt::format("variant\t{}\t{}\n", TaskTypeName(type), v);
  }
  return out;
}

bool VariantMentionsParams(const std::string& text, const Instruction& fixed) {
  if (text.empty()) return false;
  const auto& p = fixed.params;
  if (p.side && !ContainsToken(text, std::string(SideName(*p.side)))) return false;
  if (p.distance && !ContainsToken(text, FormatNumber(*p.distance))) return false;
  if (fixed.task_type == TaskType::kRotate && p.angle &&
      !ContainsToken(text, FormatNumber(RadToDeg(std::abs(*p.angle))))) {
    return false;
  }
  return true;
}

HttpTextGenerator::HttpTextGenerator(std::string host, int port, std::string path,
                                     std::chrono::milliseconds timeout)
    : host_(std::move(host)), port_(port), path_(std::move(path)), timeout_(timeout) {}

std::vector<std::string> HttpTextGenerator::Paraphrase(const std::string& base, TaskType type, int n) {
  // A fresh client per call keeps concurrent callers independent.
  const nlohmann::json request = {
      {"instruction", base}, {"task_type", std::string(TaskTypeName(type))}, {"n", n}};
  std::string last_error = "no response";
  for (int attempt = 0; attempt < 2; ++attempt) {
    httplib::Client client(host_, port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    auto res = client.Post(path_, request.dump(), "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = fmt::format("HTTP {}", res->status);
      continue;
    }
    const auto body = nlohmann::json::parse(res->body, nullptr, false);
    if (body.is_discarded() || !body.contains("variants") || !body["variants"].is_array()) {
      throw Error(ErrorCode::kValidationFailed, "generator response lacks a `variants` array");
    }
    std::vector<std::string> out;
    for (const auto& v : body["variants"]) {
      if (!v.is_string()) throw Error(ErrorCode::kValidationFailed, "non-string variant");
      out.push_back(v.get<std::string>());
    }
    return out;
  }
  throw Error(ErrorCode::kGeneratorUnavailable,
              fmt::format("{}:{}{}: {}", host_, port_, path_, last_error));
}

std::vector<Instruction> DiversifyInstruction(const Instruction& fixed, TextGenerator* generator, int n,
                                              bool fallback, const CommandSet& set) {
  if (fixed.form != InstructionForm::kFixed) {
    throw Error(ErrorCode::kValidationFailed, "diversification expects a Fixed-form instruction");
  }
  if (n < 0) throw Error(ErrorCode::kOutOfRange, "variant count must be non-negative");
  if (n == 0) return {};

  auto make = [&](std::string text) {
    Instruction ins = fixed;
    ins.form = InstructionForm::kOpenVocabulary;
    ins.text = std::move(text);
    return ins;
  };

  auto from_table = [&]() {
    auto it = set.variants.find(fixed.task_type);
    if (it == set.variants.end() || it->second.empty()) {
      throw Error(ErrorCode::kValidationFailed,
                  fmt::format("no paraphrases for {}", TaskTypeName(fixed.task_type)));
    }
    std::vector<Instruction> out;
    for (int i = 0; i < n; ++i) {
      const auto& tmpl = it->second[static_cast<std::size_t>(i) % it->second.size()];
      out.push_back(make(RenderTemplate(tmpl, fixed.params)));
    }
    return out;
  };

  if (generator == nullptr) return from_table();

  std::vector<std::string> texts;
  try {
    texts = generator->Paraphrase(fixed.text, fixed.task_type, n);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kGeneratorUnavailable && fallback) return from_table();
    throw;
  }
  if (static_cast<int>(texts.size()) != n) {
    throw Error(ErrorCode::kValidationFailed,
                fmt::format("generator returned {} variants, expected {}", texts.size(), n));
  }
  std::vector<Instruction> out;
  for (auto& text : texts) {
    if (!VariantMentionsParams(text, fixed)) throw Error(ErrorCode::kValidationFailed, text);
    out.push_back(make(std::move(text)));
  }
  return out;
}

}  // namespace flowbench
