#ifndef FLOWBENCH_POLICY_H_
#define FLOWBENCH_POLICY_H_

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "flowbench/datamodel.h"
#include "flowbench/oracle.h"
#include "flowbench/sim.h"
#include "flowbench/transport.h"

namespace flowbench {

// Maps (state, observation, instruction) to a chunk in the caller's body
// frame; an empty chunk means the task is complete.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual ActionChunk Decide(const UavState& state, const Observation& obs, const Instruction& instruction) = 0;
  // Called before each new instruction.
  virtual void Reset() {}
};

class LocalOracle : public Policy {
 public:
  LocalOracle(ScenarioSpec spec, SimConfig cfg = {}) : spec_(std::move(spec)), cfg_(cfg) {}

  ActionChunk Decide(const UavState& state, const Observation& obs, const Instruction& instruction) override;
  void Reset() override { oracle_.reset(); }

 private:
  ScenarioSpec spec_;
  SimConfig cfg_;
  std::optional<Instruction> task_;
  std::unique_ptr<OraclePolicy> oracle_;
};

inline constexpr std::chrono::milliseconds kRemoteDeadline{2000};

// Sends RemoteQuery over a bridge channel and waits for the ChunkCmd reply.
// Throws kRemoteTimeout when no reply (or no connection) within the deadline
// and kMalformedChunk for replies that break the chunk limits.
class RemotePolicy : public Policy {
 public:
  explicit RemotePolicy(std::shared_ptr<MessageChannel> channel,
                        std::chrono::milliseconds deadline = kRemoteDeadline);
  // Connects lazily, retrying until the deadline.
  static std::unique_ptr<RemotePolicy> Connect(const Endpoint& ep,
                                               std::chrono::milliseconds deadline = kRemoteDeadline);

  ActionChunk Decide(const UavState& state, const Observation& obs, const Instruction& instruction) override;

 private:
  RemotePolicy(Endpoint ep, std::chrono::milliseconds deadline);

  std::shared_ptr<MessageChannel> channel_;
  std::optional<Endpoint> endpoint_;
  std::chrono::milliseconds deadline_;
};

// Creates a policy and its instruction for a query text. Used by the serving
// side of the remote-policy protocol.
using PolicyFactory = std::function<std::pair<std::unique_ptr<Policy>, Instruction>(
    const std::string& text, const UavState& state)>;

// Oracle factory for a known scenario; text is resolved with
// InterpretInstruction against the querying state.
PolicyFactory OracleFactory(ScenarioSpec spec, SimConfig cfg = {});

// Answers RemoteQuery messages on `channel` until the peer disconnects or
// `stop` returns true. A new instruction text starts a fresh policy. Errors
// are answered with Ack{"error:<Code>: msg"}.
void ServePolicy(MessageChannel& channel, const PolicyFactory& factory,
                 const std::function<bool()>& stop = [] { return false; });

}  // namespace flowbench

#endif  // FLOWBENCH_POLICY_H_
