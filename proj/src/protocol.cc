#include "flowbench/protocol.h"

#include <bit>
#include <cstring>
#include <limits>

#include <fmt/format.h>

#include "flowbench/error.h"

namespace flowbench {
namespace {

// Upper bound on a single frame; larger prefixes are treated as corrupt.
constexpr std::uint32_t kMaxFrameBytes = 16u << 20;

class Writer {
 public:
  void U8(std::uint8_t v) { out_.push_back(v); }
  void U16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  void U32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  void F64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(bits >> shift));
  }
  void Str(const std::string& s) {
    if (s.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw Error(ErrorCode::kInvariantViolation, "string too long for the wire format");
    }
    U16(static_cast<std::uint16_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void Count(std::size_t n) {
    if (n > std::numeric_limits<std::uint16_t>::max()) {
      throw Error(ErrorCode::kInvariantViolation, "list too long for the wire format");
    }
    U16(static_cast<std::uint16_t>(n));
  }
  void Pose(const LocalPose& p) {
    F64(p.x);
    F64(p.y);
    F64(p.z);
    F64(p.roll);
    F64(p.pitch);
    F64(p.yaw);
  }
  void State(const UavState& s) {
    F64(s.t);
    Pose(s.pose);
    for (double v : s.velocity) F64(v);
  }
  Bytes Take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t U8() {
    Need(1);
    return in_[pos_++];
  }
  std::uint16_t U16() {
    Need(2);
    const std::uint16_t v = static_cast<std::uint16_t>((in_[pos_] << 8) | in_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  double F64() {
    Need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits = (bits << 8) | in_[pos_ + i];
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }
  std::string Str() {
    const std::size_t n = U16();
    Need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  LocalPose Pose() {
    LocalPose p;
    p.x = F64();
    p.y = F64();
    p.z = F64();
    p.roll = F64();
    p.pitch = F64();
    p.yaw = F64();
    return p;
  }
  UavState State() {
    UavState s;
    s.t = F64();
    s.pose = Pose();
    for (double& v : s.velocity) v = F64();
    return s;
  }
  bool Done() const { return pos_ == in_.size(); }

 private:
  void Need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw Error(ErrorCode::kFrameTooShort, "frame ends inside a field");
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

struct EncodeVisitor {
  Writer& w;
  void operator()(const TelemetryMsg& m) {
    w.F64(m.t);
    w.State(m.state);
  }
  void operator()(const FrameMetaMsg& m) {
    w.F64(m.t);
    w.Str(m.obs_ref);
  }
  void operator()(const InstructionStartMsg& m) {
    w.Str(m.id);
    w.Str(m.text);
  }
  void operator()(const ChunkCmdMsg& m) {
    w.F64(m.chunk.t_inf);
    w.State(m.chunk.anchor);
    w.F64(m.chunk.step_dt);
    w.Count(m.chunk.targets.size());
    for (const auto& p : m.chunk.targets) w.Pose(p);
  }
  void operator()(const AbortMsg& m) { w.Str(m.id); }
  void operator()(const AckMsg& m) { w.Str(m.ref); }
  void operator()(const RemoteQueryMsg& m) {
    w.F64(m.t);
    w.State(m.state);
    w.Pose(m.obs.pose);
    w.Count(m.obs.visible.size());
    for (const auto& v : m.obs.visible) {
      w.Str(v.id);
      w.U8(static_cast<std::uint8_t>(v.cls));
      w.F64(v.bearing);
      w.F64(v.elevation);
      w.F64(v.range);
    }
    w.Str(m.instruction);
  }
};

}  // namespace

MessageKind KindOf(const BridgeMessage& m) {
  return static_cast<MessageKind>(m.index() + 1);
}

const char* KindName(MessageKind k) {
  switch (k) {
    case MessageKind::kTelemetry: return "Telemetry";
    case MessageKind::kFrameMeta: return "FrameMeta";
    case MessageKind::kInstructionStart: return "InstructionStart";
    case MessageKind::kChunkCmd: return "ChunkCmd";
    case MessageKind::kAbort: return "Abort";
    case MessageKind::kAck: return "Ack";
    case MessageKind::kRemoteQuery: return "RemoteQuery";
  }
  return "?";
}

Bytes EncodeMessage(const BridgeMessage& m) {
  Writer body;
  body.U8(static_cast<std::uint8_t>(KindOf(m)));
  std::visit(EncodeVisitor{body}, m);
  Bytes payload = body.Take();
  Writer frame;
  frame.U32(static_cast<std::uint32_t>(payload.size()));
  Bytes out = frame.Take();
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

BridgeMessage DecodeMessage(std::span<const std::uint8_t> frame) {
  if (frame.size() < 5) throw Error(ErrorCode::kFrameTooShort, fmt::format("{} bytes", frame.size()));
  const std::uint32_t length = (std::uint32_t{frame[0]} << 24) | (std::uint32_t{frame[1]} << 16) |
                               (std::uint32_t{frame[2]} << 8) | std::uint32_t{frame[3]};
  if (length != frame.size() - 4) {
    throw Error(ErrorCode::kLengthMismatch,
                fmt::format("prefix says {} bytes, frame carries {}", length, frame.size() - 4));
  }
  Reader r(frame.subspan(4));
  const std::uint8_t tag = r.U8();
  BridgeMessage out;
  switch (static_cast<MessageKind>(tag)) {
    case MessageKind::kTelemetry: {
      TelemetryMsg m;
      m.t = r.F64();
      m.state = r.State();
      out = m;
      break;
    }
    case MessageKind::kFrameMeta: {
      FrameMetaMsg m;
      m.t = r.F64();
      m.obs_ref = r.Str();
      out = m;
      break;
    }
    case MessageKind::kInstructionStart: {
      InstructionStartMsg m;
      m.id = r.Str();
      m.text = r.Str();
      out = m;
      break;
    }
    case MessageKind::kChunkCmd: {
      ChunkCmdMsg m;
      m.chunk.t_inf = r.F64();
      m.chunk.anchor = r.State();
      m.chunk.step_dt = r.F64();
      const std::size_t n = r.U16();
      m.chunk.targets.reserve(n);
      for (std::size_t i = 0; i < n; ++i) m.chunk.targets.push_back(r.Pose());
      out = m;
      break;
    }
    case MessageKind::kAbort:
      out = AbortMsg{r.Str()};
      break;
    case MessageKind::kAck:
      out = AckMsg{r.Str()};
      break;
    case MessageKind::kRemoteQuery: {
      RemoteQueryMsg m;
      m.t = r.F64();
      m.state = r.State();
      m.obs.pose = r.Pose();
      const std::size_t n = r.U16();
      for (std::size_t i = 0; i < n; ++i) {
        VisibleObject v;
        v.id = r.Str();
        const std::uint8_t cls = r.U8();
        if (cls > static_cast<std::uint8_t>(ObjectClass::kGate)) {
          throw Error(ErrorCode::kUnknownKind, fmt::format("object class tag {}", cls));
        }
        v.cls = static_cast<ObjectClass>(cls);
        v.bearing = r.F64();
        v.elevation = r.F64();
        v.range = r.F64();
        m.obs.visible.push_back(std::move(v));
      }
      m.instruction = r.Str();
      out = m;
      break;
    }
    default:
      throw Error(ErrorCode::kUnknownKind, fmt::format("kind tag {}", tag));
  }
  if (!r.Done()) throw Error(ErrorCode::kLengthMismatch, "trailing bytes after the last field");
  return out;
}

void FrameAssembler::Feed(std::span<const std::uint8_t> bytes) {
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Bytes> FrameAssembler::NextFrame() {
  if (buffer_.size() < 4) return std::nullopt;
  const std::uint32_t length = (std::uint32_t{buffer_[0]} << 24) | (std::uint32_t{buffer_[1]} << 16) |
                               (std::uint32_t{buffer_[2]} << 8) | std::uint32_t{buffer_[3]};
  if (length > kMaxFrameBytes) {
    throw Error(ErrorCode::kLengthMismatch, fmt::format("frame length {} exceeds limit", length));
  }
  if (buffer_.size() < 4 + static_cast<std::size_t>(length)) return std::nullopt;
  Bytes frame(buffer_.begin(), buffer_.begin() + 4 + length);
  buffer_.erase(buffer_.begin(), buffer_.begin() + 4 + length);
  return frame;
}

namespace {

std::string PoseText(const LocalPose& p) {
  return fmt::format("({:.3f},{:.3f},{:.3f},{:.3f},{:.3f},{:.3f})", p.x, p.y, p.z, p.roll, p.pitch, p.yaw);
}

}  // namespace

std::string DescribeMessage(const BridgeMessage& m) {
  struct Visitor {
    std::string operator()(const TelemetryMsg& x) const {
      return fmt::format("Telemetry t={:.3f} pose={}", x.t, PoseText(x.state.pose));
    }
    std::string operator()(const FrameMetaMsg& x) const {
      return fmt::format("FrameMeta t={:.3f} obs={}", x.t, x.obs_ref);
    }
    std::string operator()(const InstructionStartMsg& x) const {
      return fmt::format("InstructionStart id={} text=\"{}\"", x.id, x.text);
    }
    std::string operator()(const ChunkCmdMsg& x) const {
      return fmt::format("ChunkCmd t_inf={:.3f} anchor={} n={}", x.chunk.t_inf, PoseText(x.chunk.anchor.pose),
                         x.chunk.targets.size());
    }
    std::string operator()(const AbortMsg& x) const { return fmt::format("Abort id={}", x.id); }
    std::string operator()(const AckMsg& x) const { return fmt::format("Ack ref={}", x.ref); }
    std::string operator()(const RemoteQueryMsg& x) const {
      return fmt::format("RemoteQuery t={:.3f} pose={} visible={}", x.t, PoseText(x.state.pose),
                         x.obs.visible.size());
    }
  };
  return std::visit(Visitor{}, m);
}

}  // namespace flowbench
