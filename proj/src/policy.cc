#include "flowbench/policy.h"

#include <thread>

#include <fmt/format.h>

#include "flowbench/error.h"
#include "flowbench/interpret.h"
#include "flowbench/scheduler.h"

namespace flowbench {

using Clock = std::chrono::steady_clock;

ActionChunk LocalOracle::Decide(const UavState& state, const Observation&, const Instruction& instruction) {
  if (!oracle_ || !task_ || !(*task_ == instruction)) {
    task_ = instruction;
    oracle_ = std::make_unique<OraclePolicy>(instruction, spec_, cfg_);
  }
  return oracle_->NextChunk(state);
}

RemotePolicy::RemotePolicy(std::shared_ptr<MessageChannel> channel, std::chrono::milliseconds deadline)
    : channel_(std::move(channel)), deadline_(deadline) {}

RemotePolicy::RemotePolicy(Endpoint ep, std::chrono::milliseconds deadline)
    : endpoint_(std::move(ep)), deadline_(deadline) {}

std::unique_ptr<RemotePolicy> RemotePolicy::Connect(const Endpoint& ep, std::chrono::milliseconds deadline) {
  return std::unique_ptr<RemotePolicy>(new RemotePolicy(ep, deadline));
}

ActionChunk RemotePolicy::Decide(const UavState& state, const Observation& obs, const Instruction& instruction) {
  const auto deadline = Clock::now() + deadline_;
  auto left = [&] {
    return std::max(std::chrono::milliseconds(0),
                    std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()));
  };
  while (!channel_) {
    try {
      channel_ = std::make_shared<MessageChannel>(TcpConnect(*endpoint_, left()));
    } catch (const Error& e) {
      if (left().count() <= 0) {
        throw Error(ErrorCode::kRemoteTimeout,
                    fmt::format("no policy at {}:{} within {} ms", endpoint_->host, endpoint_->port,
                                deadline_.count()));
      }
      std::this_thread::sleep_for(std::min(std::chrono::milliseconds(50), left()));
    }
  }
  try {
    channel_->Send(RemoteQueryMsg{state.t, state, obs, instruction.text});
    while (true) {
      auto reply = channel_->Receive(left());
      if (!reply) {
        throw Error(ErrorCode::kRemoteTimeout, fmt::format("no chunk within {} ms", deadline_.count()));
      }
      if (auto* cmd = std::get_if<ChunkCmdMsg>(&*reply)) {
        CheckChunk(cmd->chunk);
        return cmd->chunk;
      }
      if (auto* ack = std::get_if<AckMsg>(&*reply); ack && ack->ref.starts_with("error:")) {
        throw Error(ErrorCode::kPolicyError, ack->ref.substr(6));
      }
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kTransportError) {
      if (endpoint_) channel_.reset();
      throw Error(ErrorCode::kRemoteTimeout, fmt::format("link failed: {}", e.detail()));
    }
    throw;
  }
}

PolicyFactory OracleFactory(ScenarioSpec spec, SimConfig cfg) {
  return [spec = std::move(spec), cfg](const std::string& text, const UavState& state) {
    World w{spec, state, state.t};
    Instruction ins = InterpretInstruction(text, w, cfg);
    return std::make_pair(std::unique_ptr<Policy>(new LocalOracle(spec, cfg)), std::move(ins));
  };
}

void ServePolicy(MessageChannel& channel, const PolicyFactory& factory, const std::function<bool()>& stop) {
  std::unique_ptr<Policy> policy;
  Instruction instruction;
  std::string current_text;
  while (!stop()) {
    std::optional<BridgeMessage> msg;
    try {
      msg = channel.Receive(std::chrono::milliseconds(100));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kTransportError) return;
      throw;
    }
    if (!msg) continue;
    auto* query = std::get_if<RemoteQueryMsg>(&*msg);
    if (!query) continue;
    try {
      if (!policy || query->instruction != current_text) {
        auto [p, ins] = factory(query->instruction, query->state);
        policy = std::move(p);
        instruction = std::move(ins);
        current_text = query->instruction;
      }
      channel.Send(ChunkCmdMsg{policy->Decide(query->state, query->obs, instruction)});
    } catch (const Error& e) {
      policy.reset();
      channel.Send(AckMsg{fmt::format("error:{}", e.what())});
    }
  }
}

}  // namespace flowbench
