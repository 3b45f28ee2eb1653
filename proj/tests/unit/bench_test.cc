#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "kvaccel/bench/workload.h"

namespace kvaccel::bench {
namespace {

Config quick(std::string_view policy, double seconds) {
  Config c = Config::desk();
  c.set("policy", policy);
  c.workload.duration_s = seconds;
  return c;
}

// ---- nearest rank ----

int64_t rank_oracle(std::vector<int64_t> v, double p) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  auto rank = static_cast<size_t>(std::ceil(p * static_cast<double>(v.size())));
  return v[std::max<size_t>(rank, 1) - 1];
}

TEST(NearestRank, KnownValues) {
  std::vector<int64_t> v;
  for (int i = 100; i >= 1; --i) v.push_back(i);
  EXPECT_EQ(nearest_rank(v, 0.99), 99);
  EXPECT_EQ(nearest_rank(v, 1.0), 100);
  EXPECT_EQ(nearest_rank({7}, 0.99), 7);
  EXPECT_EQ(nearest_rank({}, 0.99), 0);
  EXPECT_EQ(nearest_rank({3, 1, 2}, 0.5), 2);
}

TEST(NearestRank, MatchesOracle) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 300; ++t) {
    std::vector<int64_t> v(1 + rng() % 500);
    for (auto& x : v) x = static_cast<int64_t>(rng() % 10000);
    for (double p : {0.5, 0.9, 0.99, 0.999}) ASSERT_EQ(nearest_rank(v, p), rank_oracle(v, p));
  }
}

// ---- CSV ----

std::vector<MetricsSample> synthetic(int n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<MetricsSample> out(n);
  for (int i = 0; i < n; ++i) {
    auto& s = out[i];
    s.interval = i;
    s.writes = rng() % 2000;
    s.reads = rng() % 200;
    s.reads_main = s.reads / 2;
    s.reads_dev = s.reads - s.reads_main;
    s.redirected = rng() % 100;
    s.blocked_returns = rng() % 3;
    s.stall_blocked_us = static_cast<int64_t>(rng() % 1000000);
    s.ticks = 10;
    s.stall_ticks = rng() % 11;
    s.slowdown_ticks = 10 - s.stall_ticks;
    s.block_h2d = rng() % 100000000;
    s.kv_d2h = rng() % 1000;
    s.internal = rng();
    s.link_util = static_cast<double>(rng() % 1000) / 1000.0;  // exact at 6 decimals
    s.bg_cpu_us = static_cast<int64_t>(rng() % 8000000);
    s.fg_cpu_us = static_cast<int64_t>(rng() % 1000000);
  }
  return out;
}

TEST(MetricsCsv, RoundTrip) {
  auto samples = synthetic(40, 1);
  std::string text = metrics_csv(samples);
  EXPECT_EQ(text.rfind("# schema: kvaccel-metrics/1\n", 0), 0u);
  EXPECT_EQ(parse_metrics_csv(text), samples);
}

TEST(MetricsCsv, RejectsOtherSchema) {
  std::string text = metrics_csv(synthetic(2, 2));
  std::string wrong = text;
  wrong.replace(wrong.find("/1"), 2, "/9");
  EXPECT_THROW(parse_metrics_csv(wrong), std::runtime_error);
  std::string cut = text.substr(0, text.rfind(','));
  EXPECT_THROW(parse_metrics_csv(cut), std::runtime_error);
  std::string junk = text;
  junk.insert(junk.rfind(',') + 1, "x");
  EXPECT_THROW(parse_metrics_csv(junk), std::runtime_error);
}

// ---- utilization CDF ----

TEST(UtilizationCdf, MatchesEmpiricalOracle) {
  auto samples = synthetic(200, 3);
  std::vector<double> u;
  for (const auto& s : samples) {
    if (2 * s.stall_ticks >= s.ticks) u.push_back(s.link_util);
  }
  ASSERT_FALSE(u.empty());
  auto cdf = utilization_cdf(samples);
  for (double x : {0.0, 0.01, 0.05, 0.1, 0.333, 0.5, 0.75, 0.999, 1.0}) {
    double expect = static_cast<double>(std::count_if(u.begin(), u.end(), [&](double v) { return v <= x; })) /
                    static_cast<double>(u.size());
    EXPECT_DOUBLE_EQ(cdf_at(cdf, x), expect) << x;
  }
  EXPECT_DOUBLE_EQ(cdf.back().fraction, 1.0);
  for (size_t i = 1; i < cdf.size(); ++i) EXPECT_LT(cdf[i - 1].utilization, cdf[i].utilization);
}

TEST(UtilizationCdf, AllIdleIsDegenerateAtZero) {
  std::vector<MetricsSample> s(5);
  for (auto& x : s) {
    x.ticks = 10;
    x.stall_ticks = 10;
  }
  auto cdf = utilization_cdf(s);
  ASSERT_EQ(cdf.size(), 1u);
  EXPECT_EQ(cdf[0], (CdfPoint{0.0, 1.0}));
}

TEST(UtilizationCdf, NoStallIntervalsIsAnError) {
  std::vector<MetricsSample> s(5);
  for (auto& x : s) x.ticks = 10;
  EXPECT_THROW(utilization_cdf(s), std::invalid_argument);
  EXPECT_THROW(utilization_cdf({}), std::invalid_argument);
}

// ---- runs ----

TEST(Run, ZeroDurationIsEmpty) {
  auto r = run_workload(quick("kvaccel", 0), WorkloadSpec::from_name("A"));
  EXPECT_TRUE(r.samples.empty());
  EXPECT_EQ(r.report.writes, 0u);
  EXPECT_EQ(r.report.reads, 0u);
  EXPECT_EQ(r.report.zero_intervals, 0u);
  EXPECT_EQ(r.report.invariant_violations, 0u);
}

TEST(Run, UnknownWorkloadRejected) {
  EXPECT_THROW(WorkloadSpec::from_name("E"), std::invalid_argument);
  EXPECT_THROW(WorkloadSpec::from_name(""), std::invalid_argument);
}

TEST(Run, SameSeedSameBytes) {
  Config c = quick("kvaccel", 8);
  auto a = run_workload(c, WorkloadSpec::from_name("B"));
  auto b = run_workload(c, WorkloadSpec::from_name("B"));
  EXPECT_EQ(metrics_csv(a.samples), metrics_csv(b.samples));
  EXPECT_EQ(report_csv(a.report), report_csv(b.report));
  c.sim.seed = 2;
  auto d = run_workload(c, WorkloadSpec::from_name("B"));
  EXPECT_NE(metrics_csv(a.samples), metrics_csv(d.samples));
}

TEST(Run, IntervalsSumToTotals) {
  auto r = run_workload(quick("baseline-stall", 10), WorkloadSpec::from_name("C"));
  ASSERT_EQ(r.samples.size(), 10u);
  uint64_t w = 0, rd = 0, bh = 0;
  for (const auto& s : r.samples) {
    w += s.writes;
    rd += s.reads;
    bh += s.block_h2d;
  }
  EXPECT_EQ(w, r.report.writes);
  EXPECT_EQ(rd, r.report.reads);
  EXPECT_EQ(bh, r.report.block_h2d);
  EXPECT_EQ(r.report.invariant_violations, 0u);
}

TEST(Run, ReadPacingFollowsRatio) {
  for (const char* name : {"B", "C"}) {
    auto spec = WorkloadSpec::from_name(name);
    auto r = run_workload(quick("baseline-stall", 10), spec);
    // Read r is issued once writes * read_w >= r * write_w.
    const double allowed = static_cast<double>(r.report.writes) * spec.read_weight / spec.write_weight;
    EXPECT_LE(static_cast<double>(r.report.reads), allowed + 1) << name;
    EXPECT_GE(static_cast<double>(r.report.reads), allowed - 2) << name;
  }
}

TEST(Run, KvAccelNeverBlocksWorkloadA) {
  Config c = quick("kvaccel", 20);
  c.device.dev_compaction = false;
  c.accel.rollback_enabled = false;
  auto r = run_workload(c, WorkloadSpec::from_name("A"));
  EXPECT_EQ(r.report.blocked_returns, 0u);
  EXPECT_EQ(r.report.zero_intervals, 0u);
  EXPECT_GT(r.report.redirected, 0u);
  EXPECT_EQ(r.report.invariant_violations, 0u);
}

TEST(Run, BaselineStallHalts) {
  auto r = run_workload(quick("baseline-stall", 30), WorkloadSpec::from_name("A"));
  EXPECT_GT(r.report.zero_intervals, 0u);
  EXPECT_EQ(r.report.redirected, 0u);
}

TEST(Run, SlowdownBaselineSleeps) {
  auto r = run_workload(quick("baseline-slowdown", 20), WorkloadSpec::from_name("A"));
  EXPECT_GT(r.report.slowdown_events, 0u);
}

TEST(Run, RangeWorkloadPreloadsThenScans) {
  Config c = quick("kvaccel", 3);
  c.workload.preload_keys = 2000;
  auto r = run_workload(c, WorkloadSpec::from_name("D"));
  EXPECT_EQ(r.report.preload_writes, 2000u);
  EXPECT_EQ(r.report.writes, 0u);
  EXPECT_GT(r.report.ranges, 0u);
  // Each range is one seek and 1024 steps of host work at least.
  const double floor_us = 1025.0 * c.host.next_us;
  EXPECT_LE(static_cast<double>(r.report.ranges), 3e6 / floor_us + 1);
}

TEST(Compare, FlagsZeroIntervals) {
  RunReport a;
  a.workload = "A";
  a.policy = "baseline-stall";
  a.writes = 100;
  a.zero_intervals = 3;
  RunReport b = a;
  b.policy = "kvaccel";
  b.rollback_mode = "eager";
  b.writes = 150;
  b.zero_intervals = 0;
  std::string t = compare_table({a, b});
  EXPECT_NE(t.find("A/baseline-stall"), std::string::npos);
  EXPECT_NE(t.find("A/kvaccel-e"), std::string::npos);
  EXPECT_NE(t.find("+50.0%"), std::string::npos);
  EXPECT_NE(t.find("! A/baseline-stall had 3 zero-throughput interval(s)"), std::string::npos);
  EXPECT_EQ(t.find("! A/kvaccel"), std::string::npos);
  EXPECT_EQ(compare_table({a, b}), t);
}

}  // namespace
}  // namespace kvaccel::bench
