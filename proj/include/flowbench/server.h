#ifndef FLOWBENCH_SERVER_H_
#define FLOWBENCH_SERVER_H_

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "flowbench/latency.h"
#include "flowbench/scheme.h"
#include "flowbench/sim.h"
#include "flowbench/transport.h"

namespace flowbench {

enum class PolicySource { kOracle, kRemote };

struct ServeOptions {
  Endpoint listen{"127.0.0.1", 0};
  ScenarioSpec scenario;
  SchemeConfig scheme;
  LatencyModel latency;
  SimConfig sim;
  PolicySource policy = PolicySource::kOracle;
  bool realtime = true;                    // pace ticks to the wall clock
  std::optional<std::uint64_t> max_ticks;  // stop after this many ticks
  std::optional<std::string> autostart;    // instruction issued at t = 0
  std::function<void(const std::string&)> on_transcript_line;
};

// Live bridge: one simulated UAV, any number of console clients (raw frames
// or WebSocket) and at most one policy client, which identifies itself by
// sending Ack{"role:policy"} first. Consoles receive Telemetry, FrameMeta,
// ChunkCmd and Ack; they send InstructionStart and Abort. Server replies:
// Ack "accept:<id>", "reject:<id>:<reason>", "abort:<id>", "complete:<id>",
// "error:<id>:<reason>".
class BridgeServer {
 public:
  explicit BridgeServer(ServeOptions opt);
  ~BridgeServer();
  BridgeServer(const BridgeServer&) = delete;
  BridgeServer& operator=(const BridgeServer&) = delete;

  int port() const { return listener_.port(); }
  // Runs the tick loop until Stop() or max_ticks.
  void Run();
  void Stop() { stop_ = true; }

  Transcript transcript() const;
  std::size_t console_count() const;
  bool has_policy_client() const;

 private:
  struct Client;
  struct Inference;

  void AcceptLoop();
  void ReadLoop(std::shared_ptr<Client> c, std::unique_ptr<ByteStream> raw);
  void TryDeliver(double now);
  void Issue(double now);
  void Broadcast(const BridgeMessage& m);
  void Record(double t, Direction d, const BridgeMessage& m);
  void RecordTick(const TickRecord& r);
  void HandleInbound(double now);
  void StartInstruction(const InstructionStartMsg& m, double now);
  void Finish(double now, const std::string& ack);

  ServeOptions opt_;
  TcpListener listener_;
  std::atomic<bool> stop_{false};
  std::thread acceptor_;

  mutable std::mutex clients_mu_;
  std::vector<std::shared_ptr<Client>> clients_;
  std::shared_ptr<MessageChannel> policy_channel_;

  std::mutex inbound_mu_;
  std::vector<BridgeMessage> inbound_;

  mutable std::mutex transcript_mu_;
  Transcript transcript_;

  World world_;
  SchemeController controller_;
  std::shared_ptr<Policy> policy_;
  std::optional<Instruction> instruction_;
  std::string instruction_id_;
  std::shared_ptr<Inference> inference_;
  std::mt19937_64 rng_;
};

}  // namespace flowbench

#endif  // FLOWBENCH_SERVER_H_
