#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "flowbench/error.h"
#include "flowbench/eval.h"
#include "flowbench/oracle.h"
#include "json.hpp"
#include "support.h"

using namespace flowbench;
using flowbench::testing::BruteForceDtw;
using flowbench::testing::RandomPose;
using flowbench::testing::RandomVec6Seq;
using flowbench::testing::Uniform;
using flowbench::testing::UniformInt;

namespace {

Trajectory RandomTrajectory(std::mt19937_64& rng, int n) {
  Trajectory t;
  for (int i = 0; i < n; ++i) t.push_back(RandomPose(rng));
  return t;
}

std::vector<EvalCase> OracleCases(int per_type) {
  std::vector<EvalCase> cases;
  for (TaskType type : kAllTaskTypes) {
    for (int s = 0; s < per_type; ++s) {
      const TaskCase tc = MakeTaskCase(type, static_cast<std::uint64_t>(s));
      const std::string id = std::string(TaskTypeName(type)) + "-" + std::to_string(s);
      cases.push_back(EvalCase{GenerateEpisode(tc.instruction, tc.scenario, id), tc.scenario});
    }
  }
  return cases;
}

PolicyMaker Oracle() {
  return [](const EvalCase& c) { return std::make_unique<LocalOracle>(c.scenario); };
}

}  // namespace

TEST_CASE("dtw examples") {
  const std::vector<Vec6> a = {Vec6{0, 0, 0, 1, 1, 1}};
  const std::vector<Vec6> b = {Vec6{3, 0, 0, 1, 1, 1}};
  CHECK(Dtw(a, b) == doctest::Approx(3.0));
  CHECK(Dtw(a, a) == 0.0);
  CHECK_THROWS_AS(Dtw({}, a), Error);
  CHECK_THROWS_AS(Ndtw({}, Trajectory{LocalPose{}}), Error);
}

TEST_CASE("dtw equals brute-force path enumeration") {
  std::mt19937_64 rng(71);
  for (int i = 0; i < 300; ++i) {
    const auto a = RandomVec6Seq(rng, UniformInt(rng, 1, 6));
    const auto b = RandomVec6Seq(rng, UniformInt(rng, 1, 6));
    CHECK(std::abs(Dtw(a, b) - BruteForceDtw(a, b)) <= 1e-9);
  }
  const auto a = RandomVec6Seq(rng, 4), b = RandomVec6Seq(rng, 5);
  CHECK(std::abs(Dtw(a, b) - BruteForceDtw(a, b)) <= 1e-9);
}

TEST_CASE("dtw metric properties") {
  std::mt19937_64 rng(72);
  for (int i = 0; i < 300; ++i) {
    auto a = RandomVec6Seq(rng, UniformInt(rng, 1, 12));
    auto b = RandomVec6Seq(rng, UniformInt(rng, 1, 12));
    const double ab = Dtw(a, b);
    CHECK(ab >= 0.0);
    CHECK(ab == doctest::Approx(Dtw(b, a)));
    CHECK(Dtw(a, a) == 0.0);
    CHECK(ab > 0.0);
    // Repeating an element never lowers the cost; repeating it in both
    // sequences of an identical pair keeps the cost at zero.
    auto stutter = a;
    const auto at = stutter.begin() + UniformInt(rng, 0, static_cast<int>(a.size()) - 1);
    const Vec6 dup = *at;
    stutter.insert(at, dup);
    CHECK(Dtw(stutter, b) >= ab - 1e-12);
    CHECK(Dtw(stutter, a) == 0.0);
  }
}

TEST_CASE("ndtw") {
  std::mt19937_64 rng(73);
  for (int i = 0; i < 100; ++i) {
    const Trajectory t = RandomTrajectory(rng, UniformInt(rng, 1, 40));
    CHECK(std::abs(Ndtw(t, t) - 1.0) <= 1e-9);
  }
  for (std::size_t n : {1u, 7u, 50u}) {
    for (double d_th : {1.0, 3.0, 4.5}) {
      CHECK(std::abs(NdtwFromCost(static_cast<double>(n) * d_th, n, d_th) - std::exp(-1.0)) <= 1e-9);
    }
  }
  double prev = 1.0;
  for (double c = 0.5; c < 20.0; c += 0.5) {
    const double v = NdtwFromCost(c, 10);
    CHECK(v < prev);
    CHECK(v > 0.0);
    prev = v;
  }

  // Fixed pair: a straight flight and its shuffled order.
  Trajectory ordered, shuffled;
  for (int i = 0; i < 12; ++i) ordered.push_back(LocalPose{0.5 * i, 0, 0, 0, 0, 0});
  shuffled = ordered;
  std::mt19937_64 shuffle_rng(3);
  std::shuffle(shuffled.begin(), shuffled.end(), shuffle_rng);
  Trajectory noisy = ordered;
  for (auto& p : noisy) p.y += 0.1;
  CHECK(Ndtw(shuffled, ordered) < Ndtw(noisy, ordered));
  CHECK(Ndtw(noisy, ordered) < 1.0);
}

TEST_CASE("success predicates on synthetic trajectories") {
  ScenarioSpec spec;
  spec.objects = {{"o", ObjectClass::kMarker, {10, 0, 0}, 1.0}};

  SUBCASE("straight line is no orbit") {
    Trajectory line;
    for (int i = 0; i < 30; ++i) line.push_back(LocalPose{-10.0 - 0.3 * i, 20, 0, 0, 0, 0});
    const SuccessResult r = CheckSuccess(line, ParseTaskSpec("orbit:target=o"), spec);
    CHECK(!r.success);
    REQUIRE(!r.notes.empty());
    CHECK(r.notes.front() == "sweep 0° < 300°");
  }
  SUBCASE("rotate 90 ending at 80 degrees") {
    Trajectory t;
    for (int i = 0; i <= 8; ++i) t.push_back(LocalPose{0, 0, 0, 0, 0, DegToRad(10.0 * i)});
    CHECK(CheckSuccess(t, ParseTaskSpec("rotate:angle=90"), spec).success);
    t.pop_back();
    t.pop_back();
    CHECK(!CheckSuccess(t, ParseTaskSpec("rotate:angle=90"), spec).success);
  }
  SUBCASE("translate distance and heading") {
    Trajectory t = {LocalPose{}, LocalPose{4.5, 0.3, 0, 0, 0, 0}};
    CHECK(CheckSuccess(t, ParseTaskSpec("translate:distance=5"), spec).success);
    CHECK(!CheckSuccess(t, ParseTaskSpec("translate:distance=8"), spec).success);
    CHECK(!CheckSuccess(t, ParseTaskSpec("translate:distance=5,heading=90"), spec).success);
  }
  SUBCASE("face target") {
    Trajectory t = {LocalPose{}, LocalPose{0, 0, 0, 0, 0, DegToRad(8.0)}};
    CHECK(CheckSuccess(t, ParseTaskSpec("facetarget:target=o"), spec).success);
    t.back().yaw = DegToRad(12.0);
    CHECK(!CheckSuccess(t, ParseTaskSpec("facetarget:target=o"), spec).success);
  }
  SUBCASE("unknown target") {
    try {
      CheckSuccess(Trajectory{LocalPose{}}, ParseTaskSpec("approach:target=zz"), spec);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kUnresolvedTarget);
    }
  }
}

TEST_CASE("oracle suite scores perfectly") {
  const auto cases = OracleCases(5);
  SuiteOptions opt;
  opt.workers = 2;
  const SuiteReport r = EvaluateSuite(cases, Oracle(), opt);
  REQUIRE(r.results.size() == 50);
  CHECK(r.overall.sr == 1.0);
  CHECK(r.overall.mean_ndtw >= 0.9);
  for (TaskType t : kAllTaskTypes) {
    CAPTURE(TaskTypeName(t));
    CHECK(r.per_task.at(t).sr == 1.0);
    CHECK(r.per_task.at(t).episodes == 5);
  }
  CHECK(std::is_sorted(r.results.begin(), r.results.end(),
                       [](const EvalResult& a, const EvalResult& b) { return a.episode_id < b.episode_id; }));

  SuiteOptions serial = opt;
  serial.workers = 1;
  CHECK(SuiteTable(EvaluateSuite(cases, Oracle(), serial)) == SuiteTable(r));
  CHECK(SuiteTable(r).rfind("task_type\t", 0) == 0);
  const auto json = nlohmann::json::parse(SuiteJson(r, opt));
  CHECK(json["overall"]["sr"] == 1.0);
  const std::string diag = SuiteDiagnostics(r);
  CHECK(std::count(diag.begin(), diag.end(), '\n') == 51);
}

TEST_CASE("a broken episode is recorded and the suite completes") {
  auto cases = OracleCases(1);
  cases[4].scenario.objects.clear();  // Approach without its target object
  REQUIRE(cases[4].reference.instruction.task_type == TaskType::kApproach);
  const SuiteReport r = EvaluateSuite(cases, Oracle(), SuiteOptions{});
  REQUIRE(r.results.size() == cases.size());
  std::size_t failed = 0;
  for (const auto& e : r.results) {
    if (!e.success) {
      ++failed;
      CHECK(e.episode_id == cases[4].reference.id);
      CHECK(!e.notes.empty());
    }
  }
  CHECK(failed == 1);
  CHECK(r.per_task.at(TaskType::kApproach).sr == 0.0);

  const PolicyMaker throwing = [](const EvalCase&) -> std::unique_ptr<Policy> { throw std::runtime_error("no gpu"); };
  const SuiteReport all_failed = EvaluateSuite(cases, throwing, SuiteOptions{});
  CHECK(all_failed.overall.sr == 0.0);
  CHECK(all_failed.results.size() == cases.size());
}

TEST_CASE("timeouts are scored on the partial trajectory") {
  const auto cases = OracleCases(1);
  SuiteOptions opt;
  opt.timeout = 1.0;
  LocalOracle oracle(cases[5].scenario);
  const EvalResult r = EvaluateCase(cases[5], oracle, opt);
  CHECK(!r.success);
  CHECK(r.ndtw > 0.0);
  CHECK(r.ndtw < 1.0);
  CHECK(r.ticks == 6);
}
