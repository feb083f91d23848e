#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "semistatic/bench/bodies.hpp"
#include "semistatic/bench/capabilities.hpp"
#include "semistatic/bench/config.hpp"
#include "semistatic/bench/csv.hpp"
#include "semistatic/bench/event_table.hpp"
#include "semistatic/bench/modes.hpp"
#include "semistatic/bench/scenario.hpp"
#include "semistatic/branch.hpp"
#include "semistatic/codepatch.hpp"

using namespace semistatic;
using namespace semistatic::bench;

namespace {

struct Command {
  int status = -1;
  std::string out;
};

Command run_command(const std::string& cmd) {
  Command c;
  FILE* pipe = ::popen((cmd + " 2>&1").c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) {
    c.out.append(buf.data(), n);
  }
  const int raw = ::pclose(pipe);
  c.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return c;
}

std::string temp_path(const std::string& name) {
  return "/tmp/semistatic_test_" + std::to_string(::getpid()) + "_" + name;
}

std::vector<std::string> variant_column(const std::vector<CsvRow>& rows) {
  std::vector<std::string> out;
  for (const auto& r : rows) {
    out.push_back(r.variant);
  }
  return out;
}

ScenarioConfig small_config(ScenarioId id) {
  ScenarioConfig cfg;
  cfg.scenario = id;
  cfg.iterations = 2000;
  cfg.warmup = 500;
  cfg.calibration_iterations = 20000;
  return cfg;
}

}  // namespace

TEST_CASE("csv header and round trip") {
  CHECK(std::string(kCsvHeader) == "scenario,variant,iter,value,counter");
  std::stringstream ss;
  write_csv_header(ss);
  write_csv_row(ss, {"s3", "take", 0, 9, "cycles"});
  write_csv_row(ss, {"s6", "semistatic:1", 17, 12345678901ULL, ""});
  CHECK(ss.str() ==
        "scenario,variant,iter,value,counter\n"
        "s3,take,0,9,cycles\n"
        "s6,semistatic:1,17,12345678901,\n");
  const auto rows = read_csv(ss);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].scenario == "s3");
  CHECK(rows[0].counter == "cycles");
  CHECK(rows[1].variant == "semistatic:1");
  CHECK(rows[1].iter == 17);
  CHECK(rows[1].value == 12345678901ULL);
  CHECK(rows[1].counter.empty());
}

TEST_CASE("csv rejects a bad header or row") {
  std::stringstream bad_header("scenario,variant,value\ns3,take,1\n");
  CHECK_THROWS_AS(read_csv(bad_header), std::runtime_error);
  std::stringstream bad_row("scenario,variant,iter,value,counter\ns3,take,x,9,cycles\n");
  CHECK_THROWS_AS(read_csv(bad_row), std::runtime_error);
  std::stringstream short_row("scenario,variant,iter,value,counter\ns3,take,1\n");
  CHECK_THROWS_AS(read_csv(short_row), std::runtime_error);
}

TEST_CASE("event table parse and lookup") {
  const auto table = EventTable::parse(R"(# comment
[alpha]
family = 6
models = [0x4e, 0x5e]
smc_clears = 0x04c3
baclears = 0x01e6   # trailing comment

[beta]
family = 6
models = [0x97]
smc_clears = 0x04c3
)");
  REQUIRE(table.entries().size() == 2);
  const auto a = table.lookup(6, 0x5e);
  REQUIRE(a);
  CHECK(a->name == "alpha");
  CHECK(a->smc_clears == 0x04c3u);
  CHECK(a->baclears == 0x01e6u);
  const auto b = table.lookup(6, 0x97);
  REQUIRE(b);
  CHECK(b->name == "beta");
  CHECK_FALSE(b->baclears.has_value());
  CHECK_FALSE(table.lookup(6, 0x99));
  CHECK_FALSE(table.lookup(15, 0x4e));
}

TEST_CASE("event table errors name the line") {
  try {
    EventTable::parse("[x]\nfamily = 6\nmodels 0x4e\n");
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
  CHECK_THROWS_AS(EventTable::parse("family = 6\n"), std::runtime_error);
  CHECK_THROWS_AS(EventTable::parse("[x]\nsmc_clears = zz\n"), std::runtime_error);
  CHECK_THROWS_AS(EventTable::load("/nonexistent/events.toml"), std::runtime_error);
}

TEST_CASE("bundled event table loads and covers known cores") {
  const auto table = EventTable::load(default_events_file());
  CHECK(table.lookup(6, 0x55));  // Skylake-SP
  CHECK(table.lookup(6, 0x6a));  // Ice Lake-SP
  CHECK(table.lookup(6, 0xcf));  // Emerald Rapids
}

TEST_CASE("scenario names and defaults") {
  CHECK(parse_scenario("s6") == ScenarioId::S6);
  CHECK(parse_scenario("S9") == ScenarioId::S9);
  CHECK_FALSE(parse_scenario("s10"));
  CHECK_FALSE(parse_scenario(""));
  for (auto id : kAllScenarios) {
    CHECK(parse_scenario(to_string(id)) == id);
  }
  ScenarioConfig cfg;
  cfg.scenario = ScenarioId::S3;
  CHECK(cfg.effective_iterations() == 10'000'000);
  cfg.scenario = ScenarioId::S2;
  CHECK(cfg.effective_iterations() == 1'000'000);
  cfg.iterations = 7;
  CHECK(cfg.effective_iterations() == 7);
  CHECK_NOTHROW(cfg.validate());
  cfg.switch_fanout = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.switch_fanout = kMaxFanout + 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("condition sequences match an independent generator") {
  std::mt19937_64 rng(1234);
  const auto bools = random_conditions(1234, 1000);
  for (auto b : bools) {
    CHECK(b == (rng() >= (std::uint64_t{1} << 63) ? 1 : 0));
  }
  std::mt19937_64 rng2(99);
  const auto idx = random_indices(99, 1000, 5);
  for (auto i : idx) {
    CHECK(i == rng2() % 5);
  }
  CHECK(random_conditions(7, 500) == random_conditions(7, 500));
  CHECK(random_conditions(7, 500) != random_conditions(8, 500));
}

TEST_CASE("condition sequences are uniform within 1%") {
  const std::size_t n = 1'000'000;
  const auto bools = random_conditions(42, n);
  std::size_t ones = 0;
  for (auto b : bools) {
    ones += b;
  }
  CHECK(std::abs(static_cast<double>(ones) / n - 0.5) < 0.01);
  for (std::size_t fanout : {2, 5, 8}) {
    const auto idx = random_indices(42, n, fanout);
    std::vector<std::size_t> counts(fanout, 0);
    for (auto i : idx) {
      ++counts.at(i);
    }
    for (auto c : counts) {
      CHECK(std::abs(static_cast<double>(c) / n - 1.0 / fanout) < 0.01);
    }
  }
}

TEST_CASE("interval conditions toggle every interval") {
  for (std::size_t k : {1, 3, 10, 1000}) {
    const auto dirs = interval_conditions(5000, k);
    REQUIRE(dirs.size() == 5000);
    std::uint8_t expected = 0;
    std::size_t run = 0;
    for (auto d : dirs) {
      if (run == k) {
        expected ^= 1;
        run = 0;
      }
      CHECK(d == expected);
      ++run;
    }
  }
}

TEST_CASE("capability report and scenario status") {
  Capabilities caps;
  caps.arch = "x86_64";
  caps.patching = true;
  caps.timestamp_counter = true;
  caps.page_size = 4096;
  caps.perf_paranoid = 2;
  caps.events_error = "no entry for this cpu";
  for (auto id : {ScenarioId::S1, ScenarioId::S3, ScenarioId::S6, ScenarioId::S7, ScenarioId::S9}) {
    CHECK(scenario_status(caps, id).availability == Availability::Runnable);
  }
  CHECK(scenario_status(caps, ScenarioId::S2).availability == Availability::Degraded);
  CHECK(scenario_status(caps, ScenarioId::S4).availability == Availability::Degraded);
  const auto report = capability_report(caps);
  CHECK(report.find("x86_64") != std::string::npos);
  CHECK(report.find("4096") != std::string::npos);
  CHECK(report.find("s2") != std::string::npos);
  CHECK(report.find("degraded (cycles only)") != std::string::npos);

  caps.hardware_counters = true;
  caps.smc_event = true;
  caps.baclears_event = true;
  for (auto id : kAllScenarios) {
    CHECK(scenario_status(caps, id).availability == Availability::Runnable);
  }

  caps.patching = false;
  caps.arch = "aarch64";
  for (auto id : kAllScenarios) {
    CHECK(scenario_status(caps, id).availability == Availability::Unavailable);
  }
  ScenarioConfig cfg = small_config(ScenarioId::S3);
  CHECK_THROWS_AS(run_scenario(cfg, caps), CapabilityMissing);
}

TEST_CASE("slow threshold and misprediction estimate") {
  std::vector<std::uint64_t> probe;
  for (int i = 0; i < 5000; ++i) {
    probe.push_back(8);
    probe.push_back(i % 3 == 0 ? 9 : 7);
    probe.push_back(20);
    probe.push_back(i % 2 == 0 ? 21 : 19);
  }
  const auto t = slow_threshold(probe);
  REQUIRE(t);
  CHECK(t->fast_mode == 8);
  CHECK(t->slow_mode == 20);
  CHECK(t->threshold == 14);
  CHECK(slow_fraction(probe, t->threshold) == doctest::Approx(0.5));

  std::vector<std::uint64_t> flat(1000, 8);
  CHECK_FALSE(slow_threshold(flat));

  // 1 in 10 slow, 2% background: rate 0.08, 0.8 per change at interval 10.
  std::vector<std::uint64_t> values;
  for (int i = 0; i < 1000; ++i) {
    values.push_back(i % 10 == 0 ? 20 : 8);
  }
  const auto e = estimate_mispredictions(values, 14, 0.02, 10);
  CHECK(e.slow_fraction == doctest::Approx(0.1));
  CHECK(e.rate == doctest::Approx(0.08));
  CHECK(e.per_change == doctest::Approx(0.8));
  CHECK(estimate_mispredictions(values, 14, 0.5, 10).rate == 0.0);
}

TEST_CASE("chunked slow fraction ignores a burst in one chunk") {
  std::vector<std::uint64_t> values(10000, 8);
  for (std::size_t i = 0; i < 1000; ++i) {
    values[i] = 30;  // whole first chunk slow
  }
  for (std::size_t i = 1000; i < values.size(); i += 100) {
    values[i] = 30;  // 1% elsewhere
  }
  CHECK(slow_fraction(values, 14) == doctest::Approx(0.109));
  CHECK(chunked_slow_fraction(values, 14) == doctest::Approx(0.01));
}

TEST_CASE("aligned estimate recovers a known misprediction count per change") {
  // Interval 1000, two slow samples after every change, plus a random 2%
  // background everywhere.
  const std::size_t k = 1000;
  const std::size_t first = 300;  // warm-up already consumed
  std::mt19937_64 rng(3);
  std::bernoulli_distribution noise(0.02);
  std::vector<std::uint64_t> values;
  for (std::size_t i = 0; i < 1000 * k; ++i) {
    const std::size_t offset = (first + i) % k;
    const bool slow = offset < 2 || noise(rng);
    values.push_back(slow ? 25 : 8);
  }
  const auto e = estimate_mispredictions_aligned(values, 14, k, first, 0.9);
  CHECK(e.background == doctest::Approx(0.02).epsilon(0.05));
  // Each of the two flipped offsets contributes 1 - background.
  CHECK(e.per_change == doctest::Approx(2.0 * (1.0 - 0.02)).epsilon(0.1));
  CHECK(e.rate == doctest::Approx(e.per_change / k));

  // Short intervals use the fallback background.
  const auto short_e = estimate_mispredictions_aligned(values, 14, 10, 0, 0.0);
  CHECK(short_e.background == 0.0);
  CHECK(short_e.per_change == doctest::Approx(short_e.rate * 10));
}

TEST_CASE("summaries trim rare spikes but keep a real slow mode") {
  ArmResult rare;
  rare.overhead = 50;
  for (int i = 0; i < 1000; ++i) {
    rare.values.push_back(i % 200 == 0 ? 5000 : 10);
  }
  summarize_arm(rare);
  CHECK(rare.trimmed == 5);
  CHECK_FALSE(rare.trim_skipped);
  CHECK(rare.summary.n == 995);
  CHECK(rare.summary.max == 10);

  ArmResult mode;
  mode.overhead = 50;
  for (int i = 0; i < 1000; ++i) {
    mode.values.push_back(i % 3 == 0 ? 200 : 10);
  }
  summarize_arm(mode);
  CHECK(mode.trim_skipped);
  CHECK(mode.trimmed == 0);
  CHECK(mode.summary.n == 1000);
  CHECK(mode.summary.max == 200);

  ArmResult raw;
  raw.trim = false;
  raw.values = {10, 10, 5000};
  summarize_arm(raw);
  CHECK(raw.summary.n == 3);
}

TEST_CASE("rows carry the direction suffix and one row per sample") {
  ScenarioResult r;
  r.config.scenario = ScenarioId::S6;
  ArmResult a;
  a.name = "conditional";
  a.values = {5, 6, 7};
  a.directions = {0, 1, 1};
  ArmResult b;
  b.name = "baseline";
  b.values = {9, 9};
  r.arms = {a, b};
  const auto rows = to_rows(r);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].variant == "conditional:0");
  CHECK(rows[2].variant == "conditional:1");
  CHECK(rows[2].iter == 2);
  CHECK(rows[2].value == 7);
  CHECK(rows[3].variant == "baseline");
  CHECK(rows[3].counter == "cycles");
  CHECK(rows[0].scenario == "s6");

  std::stringstream ss;
  write_csv(ss, r);
  CHECK(read_csv(ss).size() == 5);
}

TEST_CASE("store baseline writes the mirrored displacement to data memory") {
  SemiStaticBranch<void(), 4> branch({body_0, body_1});
  StoreBaseline baseline(branch.core());
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(baseline.entry().value);
  CHECK(bytes[0] == codepatch::kJmpRel32Opcode);
  CHECK(baseline.entry().value % 64 == branch.core().stub().entry.value % 64);
  CHECK(baseline.entry().value != branch.core().stub().entry.value);
  auto prot = codepatch::query_protection(baseline.entry());
  REQUIRE(prot);
  CHECK_FALSE(prot->executable);

  const std::vector<std::uint8_t> seq = {1, 1, 0, 1, 0, 0, 0, 1};
  std::uint64_t changes = 0;
  std::size_t dir = 0;
  for (auto d : seq) {
    baseline.set_direction(std::size_t{d});
    changes += d != dir;
    dir = d;
    const auto want = codepatch::encode_rel32(branch.core().stub().entry,
                                              codepatch::CodeAddress::of_function(d ? body_1 : body_0));
    CHECK(std::memcmp(bytes + 1, want.bytes.data(), 4) == 0);
  }
  CHECK(baseline.writes() == changes);
  CHECK_THROWS_AS(baseline.set_direction(std::size_t{2}), std::out_of_range);
}

TEST_CASE("same seed gives the same variant column and row count") {
  const auto caps = probe_capabilities();
  for (auto id : {ScenarioId::S6, ScenarioId::S7}) {
    const auto cfg = small_config(id);
    const auto a = to_rows(run_scenario(cfg, caps));
    const auto b = to_rows(run_scenario(cfg, caps));
    CHECK(a.size() == b.size());
    CHECK(variant_column(a) == variant_column(b));
    auto other = cfg;
    other.seed = cfg.seed + 1;
    CHECK(variant_column(to_rows(run_scenario(other, caps))) != variant_column(a));
  }
}

TEST_CASE("hot arms never change direction inside the measured region") {
  const auto caps = probe_capabilities();
  auto cfg = small_config(ScenarioId::S3);
  const auto r = run_scenario(cfg, caps);
  CHECK(r.arm("take").values.size() == cfg.iterations);
  CHECK(r.arm("direct_call").values.size() == cfg.iterations);
  cfg = small_config(ScenarioId::S6);
  cfg.warming = true;
  const auto r6 = run_scenario(cfg, caps);
  CHECK(r6.has_arm("conditional"));
  CHECK(r6.has_arm("semistatic"));
  CHECK(r6.has_arm("semistatic_warmed"));
  // S6 directions are the seeded sequence after the warm-up.
  const auto expected = random_conditions(cfg.seed, cfg.warmup + cfg.iterations);
  const auto& dirs = r6.arm("semistatic").directions;
  REQUIRE(dirs.size() == cfg.iterations);
  CHECK(std::equal(dirs.begin(), dirs.end(), expected.begin() + cfg.warmup));
}

TEST_CASE("every scenario runs at a small size") {
  const auto caps = probe_capabilities();
  for (auto id : kAllScenarios) {
    CAPTURE(to_string(id));
    auto cfg = small_config(id);
    if (id == ScenarioId::S8) {
      cfg.change_interval = 100;
    }
    if (id == ScenarioId::S9) {
      cfg.change_interval = 50;
    }
    const auto r = run_scenario(cfg, caps);
    CHECK_FALSE(r.arms.empty());
    for (const auto& arm : r.arms) {
      CHECK(arm.values.size() == cfg.iterations);
    }
  }
}

#ifdef BENCH_EXE
TEST_CASE("cli capabilities") {
  const auto c = run_command(std::string(BENCH_EXE) + " capabilities");
  CHECK(c.status == 0);
  CHECK(c.out.find("page size") != std::string::npos);
  CHECK(c.out.find("s9") != std::string::npos);
}

TEST_CASE("cli run writes a csv with one row per retained sample") {
  const auto path = temp_path("s3.csv");
  const auto c = run_command(std::string(BENCH_EXE) +
                             " run --scenario s3 --iterations 1000 --warmup 100"
                             " --calibration-iterations 10000 --seed 5 --out " +
                             path);
  CHECK(c.status == 0);
  CHECK(c.out.find("direct_call") != std::string::npos);
  std::ifstream in(path);
  const auto rows = read_csv(in);
  CHECK(rows.size() == 2000);
  std::remove(path.c_str());
}

TEST_CASE("cli rejects bad arguments with exit code 2") {
  CHECK(run_command(std::string(BENCH_EXE) + " run --scenario s99 --out -").status == 2);
  CHECK(run_command(std::string(BENCH_EXE) + " run --scenario s7 --fanout 1 --out -").status == 2);
  CHECK(run_command(std::string(BENCH_EXE) + " run --scenario s7").status != 0);
}
#endif
