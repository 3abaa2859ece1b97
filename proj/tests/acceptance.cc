// Acceptance suite: one PASS/FAIL line per primary criterion.
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "flowbench/datamodel.h"
#include "flowbench/eval.h"
#include "flowbench/geo.h"
#include "flowbench/ingest.h"
#include "flowbench/latency.h"
#include "flowbench/oracle.h"
#include "flowbench/policy.h"
#include "flowbench/protocol.h"
#include "flowbench/scheduler.h"
#include "flowbench/scheme.h"
#include "flowbench/sim.h"
#include "support.h"

namespace fs = std::filesystem;
using namespace flowbench;
using namespace flowbench::testing;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void Report(const std::string& name, const std::function<Outcome()>& check) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, fmt::format("exception: {}", e.what())};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (!o.pass) ++failures;
  fmt::print("{} {}: {} ({:.2f} s)\n", o.pass ? "PASS" : "FAIL", name, o.detail, secs);
  std::fflush(stdout);
}

double Seconds(Clock::time_point since) { return std::chrono::duration<double>(Clock::now() - since).count(); }

Outcome DtwOracleEquivalence() {
  std::mt19937_64 rng(1001);
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const auto a = RandomVec6Seq(rng, UniformInt(rng, 1, 6));
    const auto b = RandomVec6Seq(rng, UniformInt(rng, 1, 6));
    worst = std::max(worst, std::abs(Dtw(a, b) - BruteForceDtw(a, b)));
  }
  const double secs = Seconds(t0);
  return {worst <= 1e-9 && secs < 10.0, fmt::format("500 pairs, max |dtw - brute force| = {:.3g}, {:.2f} s < 10 s",
                                                    worst, secs)};
}

Outcome NdtwIdentity() {
  std::mt19937_64 rng(1002);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    Trajectory t;
    const int n = UniformInt(rng, 1, 60);
    for (int k = 0; k < n; ++k) t.push_back(RandomPose(rng));
    worst = std::max(worst, std::abs(Ndtw(t, t) - 1.0));
  }
  double worst_e = 0.0;
  for (std::size_t len : {1u, 10u, 57u}) {
    worst_e = std::max(worst_e, std::abs(NdtwFromCost(static_cast<double>(len) * 3.0, len, 3.0) - std::exp(-1.0)));
  }
  // Constructed pair whose DTW cost is exactly |ref| * d_th: a constant
  // 3 m lateral offset of every point.
  Trajectory ref, shifted;
  for (int k = 0; k < 20; ++k) {
    ref.push_back(LocalPose{0.5 * k, 0, 0, 0, 0, 0});
    shifted.push_back(LocalPose{0.5 * k, 3.0, 0, 0, 0, 0});
  }
  worst_e = std::max(worst_e, std::abs(Ndtw(shifted, ref, 3.0) - std::exp(-1.0)));
  return {worst <= 1e-9 && worst_e <= 1e-9,
          fmt::format("100 trajectories, max |ndtw(T,T) - 1| = {:.3g}; max |ndtw - e^-1| = {:.3g}", worst, worst_e)};
}

Outcome GeodeticRoundTrip() {
  std::mt19937_64 rng(1003);
  double dlat = 0.0, dlon = 0.0, dalt = 0.0;
  for (int i = 0; i < 1000; ++i) {
    GeoPose o;
    o.lat = Uniform(rng, -80.0, 80.0);
    o.lon = Uniform(rng, -179.9, 179.9);
    o.alt = Uniform(rng, -50.0, 500.0);
    const double r = Uniform(rng, 0.0, 2000.0), th = Uniform(rng, -kPi, kPi);
    LocalPose off;
    off.x = r * std::cos(th);
    off.y = r * std::sin(th);
    off.z = Uniform(rng, -100.0, 100.0);
    const GeoPose p = LocalToGps(o, off);
    const GeoPose back = LocalToGps(o, GpsToLocal(o, p));
    dlat = std::max(dlat, std::abs(back.lat - p.lat));
    dlon = std::max(dlon, std::abs(back.lon - p.lon));
    dalt = std::max(dalt, std::abs(back.alt - p.alt));
  }
  return {dlat < 1e-9 && dlon < 1e-9 && dalt < 1e-6,
          fmt::format("1000 points within 2 km: max error lat {:.3g} deg, lon {:.3g} deg, alt {:.3g} m", dlat, dlon,
                      dalt)};
}

Outcome AlignmentExactness() {
  std::mt19937_64 rng(1004);
  double worst_pos = 0.0, worst_dt = 0.0, worst_ideal = 0.0;
  std::size_t frames_checked = 0;
  const Instruction task = ParseTaskSpec("translate:distance=5");
  for (int trial = 0; trial < 200; ++trial) {
    GeoPose origin;
    origin.lat = Uniform(rng, -60.0, 60.0);
    origin.lon = Uniform(rng, -170.0, 170.0);
    const double start = Uniform(rng, 0.0, 1000.0);
    // Piecewise-linear path in local meters; the oracle evaluates it exactly.
    std::vector<double> ts;
    std::vector<LocalPose> ps;
    double t = start;
    LocalPose cur;
    const int n = UniformInt(rng, 3, 10);
    for (int i = 0; i < n; ++i) {
      ts.push_back(t);
      ps.push_back(cur);
      t += Uniform(rng, 0.1, 1.5);
      cur.x += Uniform(rng, -2.0, 2.0);
      cur.y += Uniform(rng, -2.0, 2.0);
      cur.z += Uniform(rng, -0.5, 0.5);
    }
    auto at = [&](double q) {
      std::size_t i = 0;
      while (i + 2 < ts.size() && q > ts[i + 1]) ++i;
      const double a = (q - ts[i]) / (ts[i + 1] - ts[i]);
      return std::array<double, 3>{ps[i].x + a * (ps[i + 1].x - ps[i].x), ps[i].y + a * (ps[i + 1].y - ps[i].y),
                                   ps[i].z + a * (ps[i + 1].z - ps[i].z)};
    };
    StateLog log;
    for (std::size_t i = 0; i < ts.size(); ++i) log.samples.push_back({ts[i], LocalToGps(origin, ps[i])});
    FrameIndex frames;
    for (int k = 0; start + k / 30.0 <= ts.back(); ++k) frames.entries.push_back({start + k / 30.0, "img"});
    const Episode e = AlignAndResample(log, frames, task, "a");
    const auto base = LogPlanePosition(log, start);
    for (std::size_t k = 0; k < e.frames.size(); ++k) {
      const auto want = LogPlanePosition(log, start + static_cast<double>(k) / 5.0);
      const auto& p = e.frames[k].pose;
      worst_pos = std::max(worst_pos, std::hypot(p.x - static_cast<double>(want[0] - base[0]),
                                                 p.y - static_cast<double>(want[1] - base[1]),
                                                 p.z - static_cast<double>(want[2] - base[2])));
      const auto ideal = at(start + e.frames[k].t), ideal_base = at(start);
      worst_ideal = std::max(worst_ideal, std::hypot(p.x - (ideal[0] - ideal_base[0]), p.y - (ideal[1] - ideal_base[1]),
                                                     p.z - (ideal[2] - ideal_base[2])));
      if (k > 0) worst_dt = std::max(worst_dt, std::abs(e.frames[k].t - e.frames[k - 1].t - 0.2));
      ++frames_checked;
    }
  }
  return {worst_pos < 1e-9 && worst_dt <= 1e-12,
          fmt::format("{} frames: max position error {:.3g} m vs the logged path ({:.3g} m vs the pre-quantization "
                      "path), max spacing error {:.3g} s from 0.200 s",
                      frames_checked, worst_pos, worst_ideal, worst_dt)};
}

Outcome OracleSuite() {
  const auto t0 = Clock::now();
  std::vector<EvalCase> cases;
  for (TaskType type : kAllTaskTypes) {
    for (std::uint64_t s = 0; s < 5; ++s) {
      const TaskCase tc = MakeTaskCase(type, 500 + s);
      cases.push_back(EvalCase{
          GenerateEpisode(tc.instruction, tc.scenario, fmt::format("{}-{}", TaskTypeName(type), s)), tc.scenario});
    }
  }
  SuiteOptions opt;
  opt.scheme.scheme = Scheme::kGloballyAligned;
  opt.latency = ParseLatency("zero");
  const SuiteReport r = EvaluateSuite(
      cases, [](const EvalCase& c) { return std::make_unique<LocalOracle>(c.scenario); }, opt);
  const double secs = Seconds(t0);
  bool all = true;
  std::string worst;
  for (const auto& [type, s] : r.per_task) {
    if (s.sr != 1.0) {
      all = false;
      worst += fmt::format(" {}:SR={:.2f}", TaskTypeName(type), s.sr);
    }
  }
  return {all && r.per_task.size() == 10 && r.overall.mean_ndtw >= 0.9 && secs < 60.0,
          fmt::format("10 types x 5 scenes: SR {:.3f}, mean NDTW {:.4f}, {:.2f} s < 60 s{}", r.overall.sr,
                      r.overall.mean_ndtw, secs, worst)};
}

Outcome PruningArithmetic() {
  std::mt19937_64 rng(1006);
  bool ok = true;
  for (int i = 0; i < 200; ++i) {
    ActionChunk c;
    c.t_inf = Uniform(rng, 0.0, 100.0);
    c.step_dt = 0.2;
    c.targets.assign(10, LocalPose{1, 0, 0, 0, 0, 0});
    const auto world = AlignChunkGlobal(c, UavState{});
    ok = ok && world.size() - PrunePassed(world, c.t_inf, 0.289).targets.size() == 1;
    ok = ok && world.size() - PrunePassed(world, c.t_inf, 0.450).targets.size() == 2;
    ok = ok && PrunePassed(world, c.t_inf, 0.0).targets.size() == 10;
  }
  // Through the scheme controller: a fresh chunk arriving after its latency.
  std::size_t kept_289 = 0, kept_450 = 0;
  for (double delay : {0.289, 0.450}) {
    SchemeConfig cfg;
    cfg.scheme = Scheme::kGloballyAligned;
    SchemeController ctl(cfg);
    ctl.Start(0.0);
    ActionChunk first;
    first.targets.assign(10, LocalPose{});
    ctl.OnRequest(0.0);
    ctl.Apply(first, 0.0, 0.0, UavState{});
    ActionChunk fresh;
    fresh.t_inf = 0.4;
    fresh.targets.assign(10, LocalPose{});
    ctl.OnRequest(0.4);
    ctl.Apply(fresh, 0.4 + delay, delay, UavState{});
    (delay < 0.3 ? kept_289 : kept_450) = ctl.queue().targets.size();
  }
  ok = ok && kept_289 == 9 && kept_450 == 8;
  return {ok, fmt::format("chunk 10, step 0.2 s: delay 0.289 s drops {}, delay 0.450 s drops {}", 10 - kept_289,
                          10 - kept_450)};
}

Outcome SchemeSeparation() {
  double ga_sum = 0.0, cont_sum = 0.0;
  bool identical = true;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const TaskCase tc = MakeTaskCase(TaskType::kOrbit, 100 + s);
    const EvalCase c{GenerateEpisode(tc.instruction, tc.scenario, fmt::format("orbit-{}", s)), tc.scenario};
    SuiteOptions opt;
    opt.latency = ParseLatency("pi0-uav");
    opt.scheme.seed = s;
    opt.scheme.scheme = Scheme::kGloballyAligned;
    LocalOracle ga_policy(tc.scenario);
    ga_sum += EvaluateCase(c, ga_policy, opt).ndtw;
    opt.scheme.scheme = Scheme::kContinuous;
    LocalOracle cont_policy(tc.scenario);
    cont_sum += EvaluateCase(c, cont_policy, opt).ndtw;

    SchemeConfig zero;
    zero.seed = s;
    zero.scheme = Scheme::kGloballyAligned;
    LocalOracle a(tc.scenario), b(tc.scenario);
    const SchemeRun ra = RunScheme(zero, LatencyModel{}, a, MakeWorld(tc.scenario), tc.instruction, 60.0);
    zero.scheme = Scheme::kContinuous;
    const SchemeRun rb = RunScheme(zero, LatencyModel{}, b, MakeWorld(tc.scenario), tc.instruction, 60.0);
    identical = identical && ra.trajectory == rb.trajectory;
  }
  const double ga = ga_sum / 10.0, cont = cont_sum / 10.0;
  return {ga > cont && identical,
          fmt::format("Orbit x 10 at 0.289 s: GloballyAligned NDTW {:.4f} vs Continuous {:.4f}; zero latency {}", ga,
                      cont, identical ? "tick-identical" : "DIVERGES")};
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome DeterminismAndFormats() {
  std::mt19937_64 rng(1008);
  int episode_ok = 0, message_ok = 0;
  for (int i = 0; i < 1000; ++i) {
    const Episode e = RandomEpisode(rng);
    const std::string bytes = SerializeEpisode(e);
    if (DeserializeEpisode(bytes) == e && SerializeEpisode(DeserializeEpisode(bytes)) == bytes) ++episode_ok;
    const BridgeMessage m = RandomMessage(rng);
    if (DecodeMessage(EncodeMessage(m)) == m) ++message_ok;
  }
  const fs::path root = fs::temp_directory_path() / fmt::format("flowbench_acceptance_{}", ::getpid());
  fs::remove_all(root);
  bool same = true;
  std::size_t files = 0;
  for (const char* sub : {"a", "b"}) {
    const std::string cmd = fmt::format("{} gen --task all --n 10 --seed 7 --out {} > /dev/null 2>&1",
                                        FLOWBENCH_CLI_PATH, (root / sub).string());
    if (std::system(cmd.c_str()) != 0) same = false;
  }
  if (same) {
    for (const auto& entry : fs::directory_iterator(root / "a")) {
      const fs::path other = root / "b" / entry.path().filename();
      same = same && fs::exists(other) && Slurp(entry.path()) == Slurp(other);
      ++files;
    }
    same = same && files > 0;
  }
  fs::remove_all(root);
  return {episode_ok == 1000 && message_ok == 1000 && same,
          fmt::format("episode round trips {}/1000, message round trips {}/1000, gen --seed 7 twice: {} ({} files)",
                      episode_ok, message_ok, same ? "byte-identical" : "DIFFERENT", files)};
}

Outcome StatsMachinery() {
  // Known composition: type k appears k + 1 times; lengths cycle 0.5 + j m.
  std::vector<Episode> corpus;
  std::map<int, std::size_t> want_hist;
  for (std::size_t k = 0; k < kAllTaskTypes.size(); ++k) {
    for (std::size_t j = 0; j <= k; ++j) {
      Episode e;
      e.id = fmt::format("{}-{}", k, j);
      e.instruction.task_type = kAllTaskTypes[k];
      const double length = 0.5 + static_cast<double>((corpus.size() * 7) % 60);
      e.frames = {Frame{0.0, {}, ""}, Frame{0.2, {length, 0, 0, 0, 0, 0}, ""}};
      ++want_hist[std::min(50, static_cast<int>(length))];
      corpus.push_back(e);
    }
  }
  const DatasetStats s = ComputeDatasetStats(corpus);
  bool exact = s.count == 55;
  for (std::size_t k = 0; k < kAllTaskTypes.size(); ++k) {
    exact = exact && s.type_distribution.at(kAllTaskTypes[k]) == static_cast<double>(k + 1) / 55.0;
  }
  std::size_t total = 0;
  for (const auto& [b, c] : s.distance_histogram) total += c;
  const bool hist = total == corpus.size() && s.distance_histogram == want_hist;
  return {exact && hist, fmt::format("55 synthetic episodes: type fractions {}, histogram total {} ({})",
                                     exact ? "exact" : "WRONG", total, hist ? "buckets match" : "buckets differ")};
}

}  // namespace

int main() {
  Report("dtw-oracle-equivalence", DtwOracleEquivalence);
  Report("ndtw-identity", NdtwIdentity);
  Report("geodetic-round-trip", GeodeticRoundTrip);
  Report("alignment-exactness", AlignmentExactness);
  Report("closed-loop-oracle-suite", OracleSuite);
  Report("latency-pruning-arithmetic", PruningArithmetic);
  Report("scheme-separation", SchemeSeparation);
  Report("determinism-and-formats", DeterminismAndFormats);
  Report("stats-machinery", StatsMachinery);
  fmt::print("{} of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
