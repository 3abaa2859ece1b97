#include "flowbench/server.h"

#include <chrono>
#include <condition_variable>

#include <fmt/format.h>

#include "flowbench/error.h"
#include "flowbench/interpret.h"

namespace flowbench {

using Clock = std::chrono::steady_clock;
using std::chrono::milliseconds;

namespace {
constexpr double kTimeEps = 1e-9;
constexpr milliseconds kNegotiateTimeout{500};
}  // namespace

struct BridgeServer::Client {
  std::shared_ptr<MessageChannel> channel;
  std::thread reader;
  std::atomic<bool> alive{true};
  std::atomic<bool> console{false};
};

struct BridgeServer::Inference {
  std::mutex mu;
  std::condition_variable cv;
  bool done = false;
  std::optional<ActionChunk> chunk;
  std::string error;
  double issued = 0.0;
  double model_delay = 0.0;
  Clock::time_point wall_issued;
  std::thread worker;
};

BridgeServer::BridgeServer(ServeOptions opt)
    : opt_(std::move(opt)),
      listener_(opt_.listen),
      world_(MakeWorld(opt_.scenario)),
      controller_(opt_.scheme),
      rng_(opt_.scheme.seed) {
  ValidateLatency(opt_.latency);
  acceptor_ = std::thread([this] { AcceptLoop(); });
}

BridgeServer::~BridgeServer() {
  stop_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::shared_ptr<Client>> clients;
  {
    std::lock_guard lock(clients_mu_);
    clients = clients_;
  }
  for (auto& c : clients) {
    if (c->reader.joinable()) c->reader.join();
  }
  for (auto& c : clients) {
    if (c->channel) c->channel->Close();
  }
  if (policy_channel_) policy_channel_->Close();
  if (inference_ && inference_->worker.joinable()) inference_->worker.join();
}

Transcript BridgeServer::transcript() const {
  std::lock_guard lock(transcript_mu_);
  return transcript_;
}

std::size_t BridgeServer::console_count() const {
  std::lock_guard lock(clients_mu_);
  std::size_t n = 0;
  for (const auto& c : clients_) n += (c->alive && c->console) ? 1 : 0;
  return n;
}

bool BridgeServer::has_policy_client() const {
  std::lock_guard lock(clients_mu_);
  return policy_channel_ != nullptr;
}

void BridgeServer::AcceptLoop() {
  while (!stop_) {
    std::unique_ptr<ByteStream> s;
    try {
      s = listener_.Accept(milliseconds(100));
    } catch (const Error&) {
      continue;
    }
    if (!s) continue;
    auto c = std::make_shared<Client>();
    std::lock_guard lock(clients_mu_);
    clients_.push_back(c);
    c->reader = std::thread([this, c, raw = std::move(s)]() mutable { ReadLoop(c, std::move(raw)); });
  }
}

void BridgeServer::ReadLoop(std::shared_ptr<Client> c, std::unique_ptr<ByteStream> raw) {
  try {
    AcceptedClient accepted = NegotiateClient(std::move(raw), kNegotiateTimeout);
    c->channel = std::make_shared<MessageChannel>(std::move(accepted.stream), std::move(accepted.leftover));
  } catch (const Error&) {
    c->alive = false;
    return;
  }
  c->console = true;
  while (!stop_ && c->alive) {
    std::optional<BridgeMessage> msg;
    try {
      msg = c->channel->Receive(milliseconds(100));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTransportError) {
        try {
          c->channel->Send(AckMsg{fmt::format("error:-:{}", e.what())});
        } catch (const Error&) {
        }
      }
      c->alive = false;
      break;
    }
    if (!msg) continue;
    if (auto* ack = std::get_if<AckMsg>(&*msg); ack && ack->ref == "role:policy") {
      std::lock_guard lock(clients_mu_);
      c->console = false;
      if (!policy_channel_) {
        policy_channel_ = c->channel;
      } else {
        c->alive = false;
      }
      return;
    }
    if (std::holds_alternative<InstructionStartMsg>(*msg) || std::holds_alternative<AbortMsg>(*msg)) {
      std::lock_guard lock(inbound_mu_);
      inbound_.push_back(std::move(*msg));
    }
  }
}

void BridgeServer::Broadcast(const BridgeMessage& m) {
  std::vector<std::shared_ptr<Client>> clients;
  {
    std::lock_guard lock(clients_mu_);
    clients = clients_;
  }
  for (auto& c : clients) {
    if (!c->alive || !c->console || !c->channel) continue;
    try {
      c->channel->Send(m);
    } catch (const Error&) {
      c->alive = false;
    }
  }
}

void BridgeServer::Record(double t, Direction d, const BridgeMessage& m) {
  TranscriptEntry e{t, d, m, std::nullopt};
  std::string line;
  if (opt_.on_transcript_line) line = FormatTranscript({e});
  {
    std::lock_guard lock(transcript_mu_);
    transcript_.push_back(std::move(e));
  }
  if (opt_.on_transcript_line) opt_.on_transcript_line(line);
}

void BridgeServer::RecordTick(const TickRecord& r) {
  TranscriptEntry e{r.t, Direction::kLocal, std::nullopt, r};
  std::string line;
  if (opt_.on_transcript_line) line = FormatTranscript({e});
  {
    std::lock_guard lock(transcript_mu_);
    transcript_.push_back(std::move(e));
  }
  if (opt_.on_transcript_line) opt_.on_transcript_line(line);
}

void BridgeServer::Finish(double now, const std::string& ack) {
  controller_.Abort();
  instruction_.reset();
  const BridgeMessage m = AckMsg{ack};
  Record(now, Direction::kUp, m);
  Broadcast(m);
}

void BridgeServer::StartInstruction(const InstructionStartMsg& m, double now) {
  auto reject = [&](const std::string& why) {
    const BridgeMessage ack = AckMsg{fmt::format("reject:{}:{}", m.id, why)};
    Record(now, Direction::kUp, ack);
    Broadcast(ack);
  };
  if (instruction_) return reject(fmt::format("instruction '{}' is active", instruction_id_));
  Instruction ins;
  try {
    ins = InterpretInstruction(m.text, world_, opt_.sim);
  } catch (const Error& e) {
    return reject(e.what());
  }
  std::shared_ptr<MessageChannel> remote;
  if (opt_.policy == PolicySource::kRemote) {
    {
      std::lock_guard lock(clients_mu_);
      remote = policy_channel_;
    }
    if (!remote) return reject("no policy client connected");
  }
  if (inference_) {
    if (inference_->worker.joinable()) inference_->worker.join();
    inference_.reset();
  }
  if (remote) {
    policy_ = std::make_shared<RemotePolicy>(remote);
  } else {
    policy_ = std::make_shared<LocalOracle>(opt_.scenario, opt_.sim);
  }
  instruction_ = std::move(ins);
  instruction_id_ = m.id;
  controller_.Start(now);
  const BridgeMessage ack = AckMsg{fmt::format("accept:{}", m.id)};
  Record(now, Direction::kUp, ack);
  Broadcast(ack);
}

void BridgeServer::HandleInbound(double now) {
  std::vector<BridgeMessage> inbound;
  {
    std::lock_guard lock(inbound_mu_);
    inbound.swap(inbound_);
  }
  for (auto& m : inbound) {
    Record(now, Direction::kDown, m);
    if (auto* start = std::get_if<InstructionStartMsg>(&m)) {
      StartInstruction(*start, now);
    } else if (auto* abort = std::get_if<AbortMsg>(&m)) {
      if (instruction_ && (abort->id.empty() || abort->id == instruction_id_)) {
        Finish(now, fmt::format("abort:{}", instruction_id_));
      }
    }
  }
}

void BridgeServer::Issue(double now) {
  auto inf = std::make_shared<Inference>();
  inf->issued = now;
  inf->model_delay = opt_.latency.SampleInference(rng_) + opt_.latency.uplink + opt_.latency.downlink;
  inf->wall_issued = Clock::now();
  const Observation obs = Observe(world_, opt_.sim);
  Record(now, Direction::kUp, RemoteQueryMsg{now, world_.uav, obs, instruction_->text});
  controller_.OnRequest(now);
  inf->worker = std::thread([inf, policy = policy_, state = world_.uav, obs, ins = *instruction_] {
    std::optional<ActionChunk> chunk;
    std::string error;
    try {
      chunk = policy->Decide(state, obs, ins);
    } catch (const std::exception& e) {
      error = e.what();
    }
    std::lock_guard lock(inf->mu);
    inf->chunk = std::move(chunk);
    inf->error = std::move(error);
    inf->done = true;
    inf->cv.notify_all();
  });
  if (inference_ && inference_->worker.joinable()) inference_->worker.join();
  inference_ = std::move(inf);
}

void BridgeServer::TryDeliver(double now) {
  if (!instruction_ || !inference_ || !controller_.in_flight()) return;
  Inference& inf = *inference_;
  if (now + kTimeEps < inf.issued + inf.model_delay) return;
  {
    std::unique_lock lock(inf.mu);
    if (opt_.realtime) {
      inf.cv.wait_for(lock, milliseconds(50), [&] { return inf.done; });
    } else {
      inf.cv.wait(lock, [&] { return inf.done; });
    }
    if (!inf.done) return;
  }
  if (!inf.error.empty() || !inf.chunk) {
    Finish(now, fmt::format("error:{}:{}", instruction_id_, inf.error));
    return;
  }
  double delay = inf.model_delay;
  if (opt_.realtime) {
    delay = std::max(delay, std::chrono::duration<double>(Clock::now() - inf.wall_issued).count());
  }
  const BridgeMessage cmd = ChunkCmdMsg{*inf.chunk};
  Record(now, Direction::kDown, cmd);
  Broadcast(cmd);
  bool active = false;
  try {
    active = controller_.Apply(*inf.chunk, now, delay, world_.uav);
  } catch (const Error& e) {
    Finish(now, fmt::format("error:{}:{}", instruction_id_, e.what()));
    return;
  }
  if (!active) Finish(now, fmt::format("complete:{}", instruction_id_));
}

void BridgeServer::Run() {
  const auto wall_start = Clock::now();
  const double t0 = world_.clock;
  if (opt_.autostart) {
    std::lock_guard lock(inbound_mu_);
    inbound_.insert(inbound_.begin(), InstructionStartMsg{"auto", *opt_.autostart});
  }
  for (std::uint64_t tick = 0; !stop_ && (!opt_.max_ticks || tick < *opt_.max_ticks); ++tick) {
    const double now = world_.clock;
    if (opt_.realtime) {
      std::this_thread::sleep_until(wall_start + std::chrono::duration_cast<Clock::duration>(
                                                     std::chrono::duration<double>(now - t0)));
    }
    HandleInbound(now);
    TryDeliver(now);

    const BridgeMessage telemetry = TelemetryMsg{now, world_.uav};
    const BridgeMessage meta = FrameMetaMsg{now, fmt::format("sim/live/{:05d}", tick)};
    Record(now, Direction::kUp, telemetry);
    Record(now, Direction::kUp, meta);
    Broadcast(telemetry);
    Broadcast(meta);

    if (instruction_ && controller_.WantsInference(now)) {
      Issue(now);
      TryDeliver(now);
    }

    TickRecord rec;
    ControlCommand cmd{world_.uav.pose, ControlMode::kPositionHold};
    if (instruction_) {
      cmd = controller_.Command(now, world_.uav, &rec);
    } else {
      rec = TickRecord{now, ControlMode::kPositionHold, world_.uav.pose, controller_.queue().generation, 0};
    }
    RecordTick(rec);
    world_ = Step(world_, cmd, opt_.scheme.step_dt, opt_.sim);
  }
}

}  // namespace flowbench
