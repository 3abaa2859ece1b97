#ifndef FLOWBENCH_PROTOCOL_H_
#define FLOWBENCH_PROTOCOL_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "flowbench/datamodel.h"
#include "flowbench/sim.h"

namespace flowbench {

using Bytes = std::vector<std::uint8_t>;

struct TelemetryMsg {
  double t = 0.0;
  UavState state;
  bool operator==(const TelemetryMsg&) const = default;
};

struct FrameMetaMsg {
  double t = 0.0;
  std::string obs_ref;
  bool operator==(const FrameMetaMsg&) const = default;
};

struct InstructionStartMsg {
  std::string id;
  std::string text;
  bool operator==(const InstructionStartMsg&) const = default;
};

struct ChunkCmdMsg {
  ActionChunk chunk;
  bool operator==(const ChunkCmdMsg&) const = default;
};

struct AbortMsg {
  std::string id;
  bool operator==(const AbortMsg&) const = default;
};

struct AckMsg {
  std::string ref;
  bool operator==(const AckMsg&) const = default;
};

struct RemoteQueryMsg {
  double t = 0.0;
  UavState state;
  Observation obs;
  std::string instruction;
  bool operator==(const RemoteQueryMsg&) const = default;
};

using BridgeMessage = std::variant<TelemetryMsg, FrameMetaMsg, InstructionStartMsg, ChunkCmdMsg, AbortMsg,
                                   AckMsg, RemoteQueryMsg>;

// Wire tags (1 byte after the length prefix).
enum class MessageKind : std::uint8_t {
  kTelemetry = 1,
  kFrameMeta = 2,
  kInstructionStart = 3,
  kChunkCmd = 4,
  kAbort = 5,
  kAck = 6,
  kRemoteQuery = 7,
};

MessageKind KindOf(const BridgeMessage& m);
const char* KindName(MessageKind k);

// Frame: u32 big-endian length of everything that follows, u8 kind tag,
// then fields. Doubles are IEEE-754 big-endian, strings carry a u16
// big-endian byte count, lists a u16 element count.
Bytes EncodeMessage(const BridgeMessage& m);
BridgeMessage DecodeMessage(std::span<const std::uint8_t> frame);

// Reassembles frames from an ordered byte stream.
class FrameAssembler {
 public:
  void Feed(std::span<const std::uint8_t> bytes);
  // Next complete frame (prefix included), if any.
  std::optional<Bytes> NextFrame();
  std::size_t buffered() const { return buffer_.size(); }

 private:
  Bytes buffer_;
};

// One-line human-readable rendering, used in trace files.
std::string DescribeMessage(const BridgeMessage& m);

}  // namespace flowbench

#endif  // FLOWBENCH_PROTOCOL_H_
