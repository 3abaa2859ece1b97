#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "flowbench/config.h"
#include "flowbench/dataset.h"
#include "flowbench/error.h"
#include "flowbench/eval.h"
#include "flowbench/ingest.h"
#include "flowbench/oracle.h"
#include "flowbench/policy.h"
#include "flowbench/scheme.h"
#include "flowbench/server.h"

namespace fs = std::filesystem;
using namespace flowbench;

namespace {

std::atomic<bool>* g_stop = nullptr;
BridgeServer* g_server = nullptr;

void OnSignal(int) {
  if (g_stop) g_stop->store(true);
  if (g_server) g_server->Stop();
}

// Config file plus per-flag overrides shared by the subcommands.
struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string latency, scheme;
  double chunk_period = 0, d_th = 0, v_max = 0, omega_max = 0, timeout = 0;
  std::size_t chunk_size = 0;
  unsigned workers = 1;
  std::map<std::string, CLI::Option*> opts;

  void Add(CLI::App* app, std::initializer_list<std::string_view> which) {
    app->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    for (auto w : which) {
      if (w == "seed") opts["seed"] = app->add_option("--seed", seed, "RNG seed");
      if (w == "latency") opts["latency"] = app->add_option("--latency", latency, "preset, seconds or uniform:LO:HI");
      if (w == "scheme") opts["scheme"] = app->add_option("--scheme", scheme, "stop | cont | global");
      if (w == "chunk_period") opts["chunk_period"] = app->add_option("--chunk-period", chunk_period, "s");
      if (w == "d_th") opts["d_th"] = app->add_option("--d-th", d_th, "NDTW threshold, m");
      if (w == "sim") {
        opts["v_max"] = app->add_option("--v-max", v_max, "m/s");
        opts["omega_max"] = app->add_option("--omega-max", omega_max, "rad/s");
        opts["chunk_size"] = app->add_option("--chunk-size", chunk_size, "targets per chunk");
        opts["timeout"] = app->add_option("--timeout", timeout, "s per episode");
      }
      if (w == "workers") opts["workers"] = app->add_option("--workers", workers, "parallel episodes");
    }
  }

  bool Set(const std::string& key) const {
    auto it = opts.find(key);
    return it != opts.end() && it->second->count() > 0;
  }

  Config Resolve() const {
    Config c = config_path.empty() ? Config{} : LoadConfig(config_path);
    if (Set("seed")) c.seed = c.scheme.seed = seed;
    if (Set("latency")) c.latency = latency;
    if (Set("scheme")) {
      auto s = ParseScheme(scheme);
      if (!s) throw Error(ErrorCode::kConfigError, fmt::format("unknown scheme '{}'", scheme));
      c.scheme.scheme = *s;
    }
    if (Set("chunk_period")) c.scheme.chunk_period = chunk_period;
    if (Set("d_th")) c.d_th = d_th;
    if (Set("v_max")) c.sim.v_max = v_max;
    if (Set("omega_max")) c.sim.omega_max = omega_max;
    if (Set("chunk_size")) c.sim.chunk_size = chunk_size;
    if (Set("timeout")) c.sim.timeout = timeout;
    if (Set("workers")) c.workers = workers;
    ValidateConfig(c);
    return c;
  }
};

void Header(const std::string& cmd, const Config& c, const std::string& extra = "") {
  fmt::print("# flowbench {} seed={}{}{}\n", cmd, c.seed, extra.empty() ? "" : " ", extra);
  std::fflush(stdout);
}

ScenarioSpec LoadScenario(const fs::path& p) { return ParseScenario(ReadFile(p)); }

fs::path SiblingScenario(const fs::path& episode_file) {
  fs::path p = episode_file;
  p.replace_extension(kScenarioExtension);
  return p;
}

// Small seeded perturbation of the start pose, quantized to the file grid.
ScenarioSpec Jitter(ScenarioSpec s, std::uint64_t seed, std::uint64_t k) {
  std::mt19937_64 rng(seed * 1000003ULL + k);
  std::uniform_real_distribution<double> pos(-0.5, 0.5), yaw(-10.0, 10.0);
  s.uav_start.x += pos(rng);
  s.uav_start.y += pos(rng);
  s.uav_start.yaw = WrapAngle(s.uav_start.yaw + DegToRad(yaw(rng)));
  s.seed = seed;
  return ParseScenario(SerializeScenario(s));
}

int CmdIngest(const std::string& log, const std::string& frames, const std::string& out, const std::string& task,
              std::string id, double rate) {
  if (id.empty()) id = fs::path(log).stem().string();
  const Instruction ins = ParseTaskSpec(task);
  Episode e = AlignAndResample(ParseFlightLog(ReadFile(log)), ParseFrameIndex(ReadFile(frames)), ins, id, rate);
  const auto violations = ValidateEpisode(e);
  if (!violations.empty()) {
    throw Error(ErrorCode::kInvariantViolation,
                fmt::format("{}: {}", violations.front().field, violations.front().message));
  }
  const fs::path path = WriteEpisode(out, e);
  WriteManifest(out);
  fmt::print("{}\t{} frames\t{}\n", e.id, e.frames.size(), path.string());
  return 0;
}

int CmdGen(const Config& c, const std::string& scenario_path, const std::string& task, std::uint64_t n,
           const std::string& out) {
  Header("gen", c, fmt::format("task={} n={}", task, n));
  std::optional<ScenarioSpec> scenario;
  if (!scenario_path.empty()) scenario = LoadScenario(scenario_path);
  for (std::uint64_t k = 0; k < n; ++k) {
    Instruction ins;
    ScenarioSpec spec;
    if (scenario) {
      ins = ParseTaskSpec(task);
      spec = Jitter(*scenario, c.seed, k);
    } else {
      std::optional<TaskType> type = ParseTaskType(task.substr(0, task.find(':')));
      if (task == "all") type = kAllTaskTypes[k % kAllTaskTypes.size()];
      if (!type) throw Error(ErrorCode::kParseError, fmt::format("unknown task '{}'", task));
      TaskCase tc = MakeTaskCase(*type, c.seed + k);
      ins = task.find(':') == std::string::npos || task == "all" ? tc.instruction : ParseTaskSpec(task);
      spec = tc.scenario;
    }
    std::string id = fmt::format("{}-s{}-{:03d}", TaskTypeName(ins.task_type), c.seed, k);
    for (auto& ch : id) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    const Episode e = GenerateEpisode(ins, spec, id, c.sim);
    WriteEpisode(out, e);
    WriteFile(fs::path(out) / (id + std::string(kScenarioExtension)), SerializeScenario(spec));
    fmt::print("{}\t{}\t{} frames\n", id, ins.text, e.frames.size());
  }
  WriteManifest(out);
  return 0;
}

std::vector<EvalCase> LoadCases(const fs::path& dir) {
  std::vector<EvalCase> cases;
  for (const auto& file : ListEpisodeFiles(dir)) {
    EvalCase c;
    c.reference = DeserializeEpisode(ReadFile(file));
    const fs::path scn = SiblingScenario(file);
    if (!fs::exists(scn)) {
      throw Error(ErrorCode::kIoError, fmt::format("episode {} has no scenario file {}", c.reference.id, scn.string()));
    }
    c.scenario = LoadScenario(scn);
    cases.push_back(std::move(c));
  }
  if (cases.empty()) throw Error(ErrorCode::kIoError, fmt::format("no episodes in {}", dir.string()));
  return cases;
}

PolicyMaker MakePolicyMaker(const std::string& policy, const SimConfig& sim) {
  if (policy == "oracle") {
    return [sim](const EvalCase& c) { return std::unique_ptr<Policy>(new LocalOracle(c.scenario, sim)); };
  }
  if (policy.starts_with("remote:")) {
    const Endpoint ep = ParseEndpoint(policy.substr(7));
    return [ep](const EvalCase&) { return std::unique_ptr<Policy>(RemotePolicy::Connect(ep)); };
  }
  throw Error(ErrorCode::kConfigError, fmt::format("unknown policy '{}'", policy));
}

int CmdEval(const Config& c, const std::string& episodes, const std::string& policy, const std::string& out) {
  SuiteOptions opt;
  opt.scheme = c.scheme;
  opt.scheme.seed = c.seed;
  opt.latency = ParseLatency(c.latency);
  opt.sim = c.sim;
  opt.d_th = c.d_th;
  opt.timeout = c.sim.timeout;
  opt.workers = policy == "oracle" ? c.workers : 1;
  Header("eval", c, fmt::format("scheme={} latency={} policy={}", SchemeName(opt.scheme.scheme), c.latency, policy));
  const SuiteReport report = EvaluateSuite(LoadCases(episodes), MakePolicyMaker(policy, c.sim), opt);
  fmt::print("{}", SuiteTable(report));
  if (!out.empty()) {
    WriteFile(fs::path(out) / "results.tsv", SuiteTable(report));
    WriteFile(fs::path(out) / "summary.json", SuiteJson(report, opt));
    WriteFile(fs::path(out) / "diagnostics.tsv", SuiteDiagnostics(report));
  }
  return 0;
}

int CmdStats(const std::string& episodes, const std::string& json_out) {
  const DatasetStats stats = ComputeDatasetStats(LoadEpisodes(episodes));
  fmt::print("{}", StatsTable(stats));
  if (!json_out.empty()) WriteFile(json_out, StatsSummaryJson(stats));
  return 0;
}

int CmdReplay(const Config& c, const std::string& episode, std::string scenario, const std::string& out) {
  const Episode e = DeserializeEpisode(ReadFile(episode));
  if (scenario.empty()) scenario = SiblingScenario(episode).string();
  const ScenarioSpec spec = LoadScenario(scenario);
  SchemeConfig sc = c.scheme;
  sc.seed = c.seed;
  Header("replay", c, fmt::format("episode={} scheme={} latency={}", e.id, SchemeName(sc.scheme), c.latency));
  LocalOracle policy(spec, c.sim);
  const SchemeRun run = RunScheme(sc, ParseLatency(c.latency), policy, MakeWorld(spec), e.instruction, c.sim.timeout, c.sim);
  WriteFile(out, FormatTranscript(run.transcript));
  Trajectory rel, ref;
  for (const auto& p : run.trajectory) rel.push_back(RelativeToStart(run.trajectory.front(), p));
  for (const auto& f : e.frames) ref.push_back(f.pose);
  fmt::print("{}\tticks={}\tndtw={:.6f}\ttranscript={}\n", e.id, run.trajectory.size(), Ndtw(rel, ref, c.d_th), out);
  return 0;
}

int CmdServe(const Config& c, const std::string& listen, const std::string& scenario, const std::string& policy,
             const std::string& task, std::uint64_t ticks, bool fast, const std::string& transcript) {
  ServeOptions opt;
  opt.listen = ParseEndpoint(listen);
  opt.scenario = LoadScenario(scenario);
  opt.scheme = c.scheme;
  opt.scheme.seed = c.seed;
  opt.latency = ParseLatency(c.latency);
  opt.sim = c.sim;
  if (policy == "remote") {
    opt.policy = PolicySource::kRemote;
  } else if (policy != "oracle") {
    throw Error(ErrorCode::kConfigError, fmt::format("unknown policy '{}'", policy));
  }
  opt.realtime = !fast;
  if (ticks > 0) opt.max_ticks = ticks;
  if (!task.empty()) opt.autostart = task;
  std::FILE* trace = nullptr;
  if (!transcript.empty()) {
    trace = std::fopen(transcript.c_str(), "w");
    if (!trace) throw Error(ErrorCode::kIoError, fmt::format("cannot write {}", transcript));
    opt.on_transcript_line = [trace](const std::string& line) {
      std::fputs(line.c_str(), trace);
      std::fflush(trace);
    };
  }
  {
    BridgeServer server(std::move(opt));
    g_server = &server;
    Header("serve", c, fmt::format("scheme={} latency={} policy={}", SchemeName(c.scheme.scheme), c.latency, policy));
    fmt::print("listening on {}:{}\n", ParseEndpoint(listen).host, server.port());
    std::fflush(stdout);
    server.Run();
    g_server = nullptr;
  }
  if (trace) std::fclose(trace);
  return 0;
}

int CmdPolicy(const Config& c, const std::string& scenario, const std::string& connect, const std::string& listen,
              bool once) {
  std::atomic<bool> stop{false};
  g_stop = &stop;
  const PolicyFactory factory = OracleFactory(LoadScenario(scenario), c.sim);
  auto stopped = [&] { return stop.load(); };
  if (!connect.empty()) {
    MessageChannel ch(TcpConnect(ParseEndpoint(connect), std::chrono::milliseconds(2000)));
    ch.Send(AckMsg{"role:policy"});
    fmt::print("policy connected to {}\n", connect);
    std::fflush(stdout);
    ServePolicy(ch, factory, stopped);
    return 0;
  }
  TcpListener listener(ParseEndpoint(listen));
  fmt::print("policy listening on {}:{}\n", ParseEndpoint(listen).host, listener.port());
  std::fflush(stdout);
  while (!stop) {
    auto s = listener.Accept(std::chrono::milliseconds(100));
    if (!s) continue;
    MessageChannel ch(std::move(s));
    ServePolicy(ch, factory, stopped);
    if (once) break;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowbench: closed-loop benchmark harness and ground-drone bridge for Flow UAV tasks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "flowbench 0.1.0");

  Common gen_opts, eval_opts, serve_opts, replay_opts, policy_opts;
  std::string log, frames, out, task, id, scenario, episodes, policy = "oracle", listen = "127.0.0.1:7700";
  std::string json_out, episode, transcript, connect;
  double rate = 5.0;
  std::uint64_t n = 1, ticks = 0;
  bool fast = false, once = false;

  auto* ingest = app.add_subcommand("ingest", "align a flight log and frame index into an episode");
  ingest->add_option("--log", log, "flight log CSV")->required()->check(CLI::ExistingFile);
  ingest->add_option("--frames", frames, "frame index CSV")->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", out, "output directory")->required();
  ingest->add_option("--task", task, "task spec, e.g. translate:distance=5,angle=0")->required();
  ingest->add_option("--id", id, "episode id (default: log file stem)");
  ingest->add_option("--rate", rate, "resampling rate, Hz");

  auto* gen = app.add_subcommand("gen", "generate rule-based episodes in the simulator");
  gen->add_option("--scenario", scenario, "scenario file (default: seeded per-task scenes)");
  gen->add_option("--task", task, "task type, task spec, or 'all'")->required();
  gen->add_option("--n", n, "number of episodes");
  gen->add_option("--out", out, "output directory")->required();
  gen_opts.Add(gen, {"seed", "sim"});

  auto* eval = app.add_subcommand("eval", "closed-loop evaluation against reference episodes");
  eval->add_option("--episodes", episodes, "episode directory (with .scn files)")->required();
  eval->add_option("--policy", policy, "oracle | remote:HOST:PORT");
  eval->add_option("--out", out, "write results.tsv, summary.json, diagnostics.tsv here");
  eval_opts.Add(eval, {"seed", "latency", "scheme", "chunk_period", "d_th", "sim", "workers"});

  auto* serve = app.add_subcommand("serve", "run the live bridge service");
  serve->add_option("--listen", listen, "HOST:PORT (port 0 picks a free port)");
  serve->add_option("--scenario", scenario, "scenario file")->required()->check(CLI::ExistingFile);
  serve->add_option("--policy", policy, "oracle | remote");
  serve->add_option("--task", task, "instruction to start immediately");
  serve->add_option("--ticks", ticks, "stop after N ticks (0 = run until interrupted)");
  serve->add_flag("--fast", fast, "do not pace ticks to the wall clock");
  serve->add_option("--transcript", transcript, "append transcript lines to this file");
  serve_opts.Add(serve, {"seed", "latency", "scheme", "chunk_period", "sim"});

  auto* stats = app.add_subcommand("stats", "dataset statistics");
  stats->add_option("--episodes", episodes, "episode directory")->required();
  stats->add_option("--json", json_out, "also write a JSON summary");

  auto* replay = app.add_subcommand("replay", "re-execute an episode and write its transcript");
  replay->add_option("--episode", episode, "episode file")->required()->check(CLI::ExistingFile);
  replay->add_option("--scenario", scenario, "scenario file (default: next to the episode)");
  replay->add_option("--out", out, "transcript output file")->required();
  replay_opts.Add(replay, {"seed", "latency", "scheme", "chunk_period", "d_th", "sim"});

  auto* pol = app.add_subcommand("policy", "serve the scripted oracle as a remote policy");
  pol->add_option("--scenario", scenario, "scenario file")->required()->check(CLI::ExistingFile);
  auto* conn = pol->add_option("--connect", connect, "connect to a running serve instance");
  pol->add_option("--listen", listen, "accept remote-policy clients")->excludes(conn);
  pol->add_flag("--once", once, "exit after the first client disconnects");
  policy_opts.Add(pol, {"sim"});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::signal(SIGINT, OnSignal);
  std::signal(SIGTERM, OnSignal);
  try {
    if (*ingest) return CmdIngest(log, frames, out, task, id, rate);
    if (*gen) return CmdGen(gen_opts.Resolve(), scenario, task, n, out);
    if (*eval) return CmdEval(eval_opts.Resolve(), episodes, policy, out);
    if (*serve) return CmdServe(serve_opts.Resolve(), listen, scenario, policy, task, ticks, fast, transcript);
    if (*stats) return CmdStats(episodes, json_out);
    if (*replay) return CmdReplay(replay_opts.Resolve(), episode, scenario, out);
    if (*pol) return CmdPolicy(policy_opts.Resolve(), scenario, connect, listen, once);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
