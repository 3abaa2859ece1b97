#include <chrono>
#include <cmath>
#include <random>
#include <thread>

#include "doctest.h"
#include "flowbench/error.h"
#include "flowbench/eval.h"
#include "flowbench/interpret.h"
#include "flowbench/latency.h"
#include "flowbench/policy.h"
#include "flowbench/scheduler.h"
#include "flowbench/scheme.h"
#include "support.h"

using namespace flowbench;
using namespace std::chrono_literals;
using flowbench::testing::RandomPose;
using flowbench::testing::Uniform;
using flowbench::testing::UniformInt;

namespace {

ActionChunk Chunk(double t_inf, std::size_t n, double step_dt = 0.2) {
  ActionChunk c;
  c.t_inf = t_inf;
  c.step_dt = step_dt;
  for (std::size_t k = 1; k <= n; ++k) c.targets.push_back(LocalPose{0.3 * static_cast<double>(k), 0, 0, 0, 0, 0});
  return c;
}

template <typename Fn>
ErrorCode CodeOf(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIoError;
}

SchemeRun Run(Scheme scheme, const std::string& latency, const TaskCase& tc, std::uint64_t seed = 0,
              double timeout = 60.0) {
  SchemeConfig cfg;
  cfg.scheme = scheme;
  cfg.seed = seed;
  LocalOracle oracle(tc.scenario);
  return RunScheme(cfg, ParseLatency(latency), oracle, MakeWorld(tc.scenario), tc.instruction, timeout);
}

std::vector<TickRecord> Ticks(const Transcript& t) {
  std::vector<TickRecord> out;
  for (const auto& e : t)
    if (e.tick) out.push_back(*e.tick);
  return out;
}

class ThrowingPolicy : public Policy {
 public:
  ActionChunk Decide(const UavState&, const Observation&, const Instruction&) override {
    throw std::runtime_error("model crashed");
  }
};

class HoverPolicy : public Policy {
 public:
  ActionChunk Decide(const UavState& s, const Observation&, const Instruction&) override {
    ActionChunk c;
    c.t_inf = s.t;
    c.anchor = s;
    c.targets.assign(10, LocalPose{});
    return c;
  }
};

}  // namespace

TEST_CASE("align_chunk_global examples") {
  UavState anchor;
  anchor.pose = {10, 5, 2, 0, 0, kPi / 2};
  ActionChunk c = Chunk(0.0, 1);
  c.targets[0] = {1, 0, 0, 0, 0, 0};
  const auto world = AlignChunkGlobal(c, anchor);
  REQUIRE(world.size() == 1);
  CHECK(world[0].pose.x == doctest::Approx(10.0));
  CHECK(world[0].pose.y == doctest::Approx(6.0));
  CHECK(world[0].pose.z == doctest::Approx(2.0));
  CHECK(world[0].pose.yaw == doctest::Approx(kPi / 2));

  const auto etas = AlignChunkGlobal(Chunk(3.0, 10), UavState{});
  REQUIRE(etas.size() == 10);
  for (std::size_t k = 0; k < 10; ++k) CHECK(etas[k].eta == doctest::Approx(3.2 + 0.2 * static_cast<double>(k)));
  CHECK(etas.back().eta == doctest::Approx(5.0));

  CHECK(CodeOf([] { AlignChunkGlobal(ActionChunk{}, UavState{}); }) == ErrorCode::kEmptyChunk);
}

TEST_CASE("align_chunk_global with a zero anchor is the identity") {
  std::mt19937_64 rng(61);
  for (int i = 0; i < 300; ++i) {
    ActionChunk c;
    c.t_inf = Uniform(rng, 0.0, 50.0);
    const int n = UniformInt(rng, 1, 64);
    for (int k = 0; k < n; ++k) {
      LocalPose p = RandomPose(rng, 5.0);
      c.targets.push_back(p);
    }
    const auto out = AlignChunkGlobal(c, UavState{});
    for (int k = 0; k < n; ++k) {
      CHECK(out[k].pose.x == c.targets[k].x);
      CHECK(out[k].pose.y == c.targets[k].y);
      CHECK(out[k].pose.z == c.targets[k].z);
      CHECK(out[k].pose.yaw == doctest::Approx(c.targets[k].yaw));
      CHECK(out[k].eta == doctest::Approx(c.t_inf + 0.2 * (k + 1)));
    }
  }
}

TEST_CASE("align then body-frame inverse recovers targets") {
  std::mt19937_64 rng(62);
  for (int i = 0; i < 300; ++i) {
    UavState anchor;
    anchor.pose = RandomPose(rng);
    ActionChunk c = Chunk(1.0, 5);
    for (auto& t : c.targets) t = RandomPose(rng, 4.0);
    const auto out = AlignChunkGlobal(c, anchor);
    for (std::size_t k = 0; k < out.size(); ++k) {
      const LocalPose back = WorldToBody(anchor.pose, out[k].pose);
      CHECK(back.x == doctest::Approx(c.targets[k].x));
      CHECK(back.y == doctest::Approx(c.targets[k].y));
      CHECK(std::abs(AngleDiff(back.yaw, c.targets[k].yaw)) < 1e-9);
    }
  }
}

TEST_CASE("prune_passed examples") {
  const auto targets = AlignChunkGlobal(Chunk(7.0, 10), UavState{});
  const TargetQueue q = PrunePassed(targets, 7.0, 0.289);
  CHECK(q.targets.size() == 9);
  CHECK(q.targets.front() == targets[1]);
  CHECK(PrunePassed(targets, 7.0, 0.0).targets.size() == 10);
  CHECK(PrunePassed(targets, 7.0, 0.450).targets.size() == 8);
  const TargetQueue hold = PrunePassed(targets, 100.0, 0.1);
  REQUIRE(hold.targets.size() == 1);
  CHECK(hold.targets[0] == targets.back());
}

TEST_CASE("prune_passed is monotone in the delay") {
  std::mt19937_64 rng(63);
  for (int i = 0; i < 500; ++i) {
    const double t_inf = Uniform(rng, 0.0, 20.0);
    const auto targets = AlignChunkGlobal(Chunk(t_inf, UniformInt(rng, 1, 20)), UavState{});
    const double now = t_inf + Uniform(rng, -0.5, 2.0);
    const double d1 = Uniform(rng, 0.0, 3.0), d2 = d1 + Uniform(rng, 0.0, 3.0);
    const TargetQueue a = PrunePassed(targets, now, d1), b = PrunePassed(targets, now, d2);
    CHECK(b.targets.size() <= a.targets.size());
    for (const auto& t : b.targets) CHECK(std::find(a.targets.begin(), a.targets.end(), t) != a.targets.end());
    for (std::size_t k = 1; k < a.targets.size(); ++k) CHECK(a.targets[k - 1].eta < a.targets[k].eta);
  }
}

TEST_CASE("check_chunk bounds") {
  CHECK_NOTHROW(CheckChunk(Chunk(0.0, 64)));
  CHECK(CodeOf([] { CheckChunk(Chunk(0.0, 65)); }) == ErrorCode::kMalformedChunk);
  ActionChunk nan = Chunk(0.0, 3);
  nan.targets[1].y = std::nan("");
  CHECK(CodeOf([&] { CheckChunk(nan); }) == ErrorCode::kMalformedChunk);
  CHECK(CodeOf([] { CheckChunk(Chunk(0.0, 3, 0.0)); }) == ErrorCode::kMalformedChunk);
}

TEST_CASE("latency models") {
  CHECK(ParseLatency("pi0-uav").MeanTotal() == doctest::Approx(0.289));
  CHECK(ParseLatency("zero").MeanTotal() == 0.0);
  CHECK(ParseLatency("0.12").MeanTotal() == doctest::Approx(0.12));
  const LatencyModel u = ParseLatency("uniform:0.1:0.3+0.02+0.03");
  CHECK(u.inference_lo == doctest::Approx(0.1));
  CHECK(u.inference_hi == doctest::Approx(0.3));
  CHECK(u.uplink == doctest::Approx(0.02));
  CHECK(u.downlink == doctest::Approx(0.03));
  std::mt19937_64 rng(64);
  for (int i = 0; i < 1000; ++i) {
    const double s = u.SampleInference(rng);
    CHECK(s >= 0.1);
    CHECK(s <= 0.3);
  }
  for (const auto& [name, value] : LatencyPresets()) CHECK(ParseLatency(name).MeanTotal() == doctest::Approx(value));
  CHECK_THROWS_AS(ParseLatency("-1"), Error);
  CHECK_THROWS_AS(ParseLatency("warp-speed"), Error);
  CHECK_THROWS_AS(ParseLatency("uniform:0.3:0.1"), Error);
}

TEST_CASE("scheme names and config") {
  CHECK(ParseScheme("stop") == Scheme::kStopAndInfer);
  CHECK(ParseScheme("cont") == Scheme::kContinuous);
  CHECK(ParseScheme("global") == Scheme::kGloballyAligned);
  CHECK(ParseScheme(SchemeName(Scheme::kGloballyAligned)) == Scheme::kGloballyAligned);
  CHECK(!ParseScheme("fast"));
  SchemeConfig bad;
  bad.chunk_period = 0.1;
  CHECK_THROWS_AS(ValidateSchemeConfig(bad), Error);
}

TEST_CASE("globally aligned translate reaches its goal") {
  TaskCase tc;
  tc.instruction = ParseTaskSpec("translate:distance=5");
  const SchemeRun run = Run(Scheme::kGloballyAligned, "zero", tc);
  const auto& last = run.trajectory.back();
  CHECK(std::hypot(last.x - 5.0, last.y, last.z) < 0.1);
  CHECK(run.transcript.front().message.has_value());
  CHECK(std::holds_alternative<InstructionStartMsg>(*run.transcript.front().message));
  CHECK(std::get<AckMsg>(*run.transcript.back().message).ref == "complete:run-0");
}

TEST_CASE("stop-and-infer holds for every inference") {
  const TaskCase tc = MakeTaskCase(TaskType::kOrbit, 2);
  const SchemeRun run = Run(Scheme::kStopAndInfer, "pi0-uav", tc);
  const auto& tr = run.transcript;
  int checked = 0;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (!tr[i].message || !std::holds_alternative<RemoteQueryMsg>(*tr[i].message)) continue;
    const double tq = tr[i].t;
    std::optional<double> resume;
    bool held = true;
    for (std::size_t j = i + 1; j < tr.size(); ++j) {
      if (!tr[j].tick || tr[j].t < tq) continue;
      if (tr[j].tick->mode == ControlMode::kGoTo) {
        resume = tr[j].t;
        break;
      }
      held = held && tr[j].tick->mode == ControlMode::kPositionHold;
    }
    if (!resume) continue;  // the final query reports completion
    CHECK(held);
    CHECK(*resume - tq >= 0.289 - 1e-9);
    ++checked;
  }
  CHECK(checked >= 2);
}

TEST_CASE("scheme runs are deterministic") {
  const TaskCase tc = MakeTaskCase(TaskType::kOrbit, 4);
  for (Scheme s : {Scheme::kStopAndInfer, Scheme::kContinuous, Scheme::kGloballyAligned}) {
    const SchemeRun a = Run(s, "uniform:0.05:0.45", tc, 9, 90.0);
    const SchemeRun b = Run(s, "uniform:0.05:0.45", tc, 9, 90.0);
    CHECK(FormatTranscript(a.transcript) == FormatTranscript(b.transcript));
    CHECK(a.trajectory == b.trajectory);
  }
}

TEST_CASE("zero latency: globally aligned equals continuous tick for tick") {
  for (TaskType type : kAllTaskTypes) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const TaskCase tc = MakeTaskCase(type, seed);
      const SchemeRun ga = Run(Scheme::kGloballyAligned, "zero", tc);
      const SchemeRun cont = Run(Scheme::kContinuous, "zero", tc);
      CAPTURE(TaskTypeName(type));
      CHECK(ga.trajectory == cont.trajectory);
    }
  }
}

TEST_CASE("queue generations never interleave") {
  for (Scheme s : {Scheme::kContinuous, Scheme::kGloballyAligned, Scheme::kStopAndInfer}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const TaskCase tc = MakeTaskCase(kAllTaskTypes[seed * 3 % 10], seed);
      SchemeRun run;
      try {
        run = Run(s, "uniform:0.05:0.45", tc, seed);
      } catch (const SchemeTimeout& t) {
        run = t.run();
      }
      std::uint64_t current = 0;
      for (const TickRecord& r : Ticks(run.transcript)) {
        if (r.mode == ControlMode::kPositionHold && r.generation == 0) continue;
        CHECK(r.generation >= current);
        current = r.generation;
      }
    }
  }
}

TEST_CASE("controller swaps the queue atomically") {
  SchemeConfig cfg;
  cfg.scheme = Scheme::kGloballyAligned;
  SchemeController ctl(cfg);
  ctl.Start(0.0);
  CHECK(ctl.WantsInference(0.0));
  ctl.OnRequest(0.0);
  CHECK(ctl.in_flight());
  CHECK(!ctl.WantsInference(0.0));
  UavState s;
  CHECK(ctl.Apply(Chunk(0.0, 10), 0.0, 0.0, s));
  CHECK(ctl.queue().generation == 1);
  CHECK(ctl.queue().targets.size() == 10);

  TickRecord rec;
  ctl.Command(0.2, s, &rec);
  CHECK(rec.generation == 1);
  ctl.OnRequest(0.4);
  CHECK(ctl.Apply(Chunk(0.4, 10), 0.6, 0.2, s));
  CHECK(ctl.queue().generation == 2);
  for (const auto& t : ctl.queue().targets) CHECK(t.eta > 0.6);
  CHECK(!ctl.Apply(ActionChunk{}, 0.8, 0.0, s));

  ctl.Abort();
  ctl.Command(1.0, s, &rec);
  CHECK(rec.mode == ControlMode::kPositionHold);
}

TEST_CASE("policy failures and timeouts") {
  const TaskCase tc = MakeTaskCase(TaskType::kTakeoff, 1);
  ThrowingPolicy bad;
  CHECK(CodeOf([&] {
          RunScheme(SchemeConfig{}, LatencyModel{}, bad, MakeWorld(tc.scenario), tc.instruction, 10.0);
        }) == ErrorCode::kPolicyError);

  HoverPolicy hover;
  try {
    RunScheme(SchemeConfig{}, LatencyModel{}, hover, MakeWorld(tc.scenario), tc.instruction, 3.0);
    FAIL("expected timeout");
  } catch (const SchemeTimeout& t) {
    CHECK(t.code() == ErrorCode::kTimeout);
    CHECK(t.run().trajectory.size() == 16);
    CHECK(t.run().duration == doctest::Approx(3.0));
  }
}

TEST_CASE("local oracle returns an empty chunk when the task is complete") {
  const TaskCase tc = MakeTaskCase(TaskType::kRotate, 0);
  LocalOracle oracle(tc.scenario);
  World w = MakeWorld(tc.scenario);
  for (int i = 0;; ++i) {
    REQUIRE(i < 200);
    const ActionChunk c = oracle.Decide(w.uav, Observe(w), tc.instruction);
    if (c.targets.empty()) break;
    w = Step(w, ControlCommand{BodyToWorld(c.anchor.pose, c.targets.front()), ControlMode::kGoTo}, 0.2);
  }
  CHECK(oracle.Decide(w.uav, Observe(w), tc.instruction).targets.empty());
  const double turned = AngleDiff(tc.scenario.uav_start.yaw, w.uav.pose.yaw);
  CHECK(turned == doctest::Approx(*tc.instruction.params.angle).epsilon(0.05));
}

TEST_CASE("interpret instruction") {
  ScenarioSpec spec;
  spec.objects = {{"car1", ObjectClass::kCar, {10, 0, 0}, 1.0},
                  {"tree1", ObjectClass::kTree, {4, 1, 0}, 1.0},
                  {"car2", ObjectClass::kCar, {-3, 0, 0}, 1.0}};
  const World w = MakeWorld(spec);
  const Instruction orbit = InterpretInstruction("orbit the car", w);
  CHECK(orbit.task_type == TaskType::kOrbit);
  CHECK(orbit.params.target == "car1");  // car2 is closer but behind
  CHECK(orbit.form == InstructionForm::kOpenVocabulary);

  const Instruction fixed = InterpretInstruction("orbit around the object", w);
  CHECK(fixed.params.target == "tree1");
  CHECK(fixed.form == InstructionForm::kFixed);

  const Instruction spec_text = InterpretInstruction("passside:target=car2,side=left", w);
  CHECK(spec_text.task_type == TaskType::kPassSide);
  CHECK(spec_text.params.side == Side::kLeft);

  CHECK(InterpretInstruction("move 5 meters forward", w).params.distance == 5.0);
  CHECK(*InterpretInstruction("turn right 90 degrees", w).params.angle == doctest::Approx(-kPi / 2));
  CHECK(CodeOf([&] { InterpretInstruction("make me a sandwich", w); }) == ErrorCode::kUnsupportedTask);
  CHECK(CodeOf([&] { InterpretInstruction("orbit the person", w); }) == ErrorCode::kUnresolvedTarget);
}

TEST_CASE("remote policy: unreachable endpoint times out after the deadline") {
  int port = 0;
  {
    TcpListener l(Endpoint{"127.0.0.1", 0});
    port = l.port();
  }
  auto remote = RemotePolicy::Connect(Endpoint{"127.0.0.1", port});
  const auto t0 = std::chrono::steady_clock::now();
  const ErrorCode code = CodeOf([&] { remote->Decide(UavState{}, Observation{}, ParseTaskSpec("takeoff:height=2")); });
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(code == ErrorCode::kRemoteTimeout);
  CHECK(elapsed >= 1.9);
  CHECK(elapsed < 3.5);
}

TEST_CASE("remote policy: oversized chunk is malformed") {
  auto [x, y] = MakeLoopbackPair();
  auto client = std::make_shared<MessageChannel>(std::move(x));
  MessageChannel server(std::move(y));
  std::thread peer([&] {
    auto q = server.Receive(2000ms);
    REQUIRE(q.has_value());
    CHECK(std::holds_alternative<RemoteQueryMsg>(*q));
    server.Send(ChunkCmdMsg{Chunk(0.0, 65)});
  });
  RemotePolicy remote(client);
  CHECK(CodeOf([&] { remote.Decide(UavState{}, Observation{}, ParseTaskSpec("takeoff:height=2")); }) ==
        ErrorCode::kMalformedChunk);
  peer.join();
}

TEST_CASE("remote policy: silent peer times out") {
  auto [x, y] = MakeLoopbackPair();
  RemotePolicy remote(std::make_shared<MessageChannel>(std::move(x)), 300ms);
  CHECK(CodeOf([&] { remote.Decide(UavState{}, Observation{}, ParseTaskSpec("takeoff:height=2")); }) ==
        ErrorCode::kRemoteTimeout);
}

TEST_CASE("remote policy served over loopback matches the local oracle") {
  for (TaskType type : {TaskType::kOrbit, TaskType::kFlyBetween, TaskType::kTranslate}) {
    const TaskCase tc = MakeTaskCase(type, 5);
    auto [x, y] = MakeLoopbackPair();
    auto client = std::make_shared<MessageChannel>(std::move(x));
    MessageChannel server(std::move(y));
    std::atomic<bool> stop{false};
    std::thread serve([&] { ServePolicy(server, OracleFactory(tc.scenario), [&] { return stop.load(); }); });

    RemotePolicy remote(client);
    SchemeConfig cfg;
    const SchemeRun a = RunScheme(cfg, ParseLatency("pi0-uav"), remote, MakeWorld(tc.scenario), tc.instruction, 60.0);
    LocalOracle local(tc.scenario);
    const SchemeRun b = RunScheme(cfg, ParseLatency("pi0-uav"), local, MakeWorld(tc.scenario), tc.instruction, 60.0);
    CAPTURE(TaskTypeName(type));
    CHECK(a.trajectory.size() == b.trajectory.size());
    if (a.trajectory.size() == b.trajectory.size()) {
      for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
        CHECK(std::hypot(a.trajectory[i].x - b.trajectory[i].x, a.trajectory[i].y - b.trajectory[i].y) < 1e-6);
      }
    }

    Instruction nonsense = tc.instruction;
    nonsense.text = "sing a song";
    nonsense.form = InstructionForm::kOpenVocabulary;
    CHECK(CodeOf([&] { remote.Decide(UavState{}, Observation{}, nonsense); }) == ErrorCode::kPolicyError);
    stop = true;
    client->Close();
    serve.join();
  }
}
