#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "kvaccel/config.h"

namespace kvaccel::bench {

// Op mix and actor roles of one benchmark workload.
//   A  one writer, no reads
//   B  writer + paced reader, 9 writes per read
//   C  writer + paced reader, 8 writes per 2 reads
//   D  random preload, then one range actor (Seek + range_next Next)
struct WorkloadSpec {
  char name = 'A';
  uint32_t write_weight = 1;
  uint32_t read_weight = 0;
  bool ranges = false;

  static WorkloadSpec from_name(std::string_view name);  // throws std::invalid_argument
};

// One row per virtual second.
struct MetricsSample {
  uint64_t interval = 0;
  uint64_t writes = 0;  // acked
  uint64_t reads = 0;
  uint64_t ranges = 0;
  uint64_t reads_main = 0;
  uint64_t reads_dev = 0;
  uint64_t redirected = 0;
  uint64_t blocked_returns = 0;
  uint64_t slowdown_sleeps = 0;
  int64_t stall_blocked_us = 0;  // writer time spent waiting on a blocked put
  uint32_t ticks = 0;            // detector samples
  uint32_t stall_ticks = 0;
  uint32_t slowdown_ticks = 0;
  uint64_t block_h2d = 0;  // bytes
  uint64_t block_d2h = 0;
  uint64_t kv_h2d = 0;
  uint64_t kv_d2h = 0;
  uint64_t internal = 0;
  double link_util = 0;
  int64_t bg_cpu_us = 0;
  int64_t fg_cpu_us = 0;

  // Stall in at least half of the detector samples.
  bool stalled() const { return ticks > 0 && 2 * stall_ticks >= ticks; }
  bool operator==(const MetricsSample&) const = default;
};

struct RunReport {
  std::string workload;
  std::string policy;
  std::string rollback_mode;
  uint64_t seed = 0;
  double duration_s = 0;
  uint32_t compaction_workers = 0;
  uint64_t writes = 0;
  uint64_t reads = 0;
  uint64_t ranges = 0;
  uint64_t preload_writes = 0;
  double ops_per_s = 0;
  double write_mb_per_s = 0;  // key + value bytes of acked writes
  int64_t p99_write_us = 0;
  int64_t p99_read_us = 0;
  int64_t p99_range_us = 0;
  double cpu_pct = 0;
  double efficiency = 0;  // write_mb_per_s / cpu_pct
  uint64_t zero_intervals = 0;
  uint64_t stall_intervals = 0;
  uint64_t stall_episodes = 0;
  uint64_t slowdown_events = 0;
  uint64_t blocked_returns = 0;
  uint64_t redirected = 0;
  uint64_t reads_main = 0;
  uint64_t reads_dev = 0;
  uint64_t rollbacks = 0;
  uint64_t rollback_bytes = 0;
  uint64_t rollback_passes = 0;
  uint64_t rollback_pauses = 0;
  uint64_t rollback_merged = 0;
  uint64_t rollback_stale = 0;
  uint64_t block_h2d = 0;
  uint64_t block_d2h = 0;
  uint64_t kv_h2d = 0;
  uint64_t kv_d2h = 0;
  uint64_t internal = 0;
  uint64_t invariant_violations = 0;
  std::vector<std::string> violations;

  double main_read_fraction() const {
    uint64_t n = reads_main + reads_dev;
    return n ? static_cast<double>(reads_main) / static_cast<double>(n) : 0.0;
  }
};

struct RunResult {
  RunReport report;
  std::vector<MetricsSample> samples;  // measured window only
};

// Deterministic for a given config (seed included).
RunResult run_workload(const Config& cfg, const WorkloadSpec& spec);

// Nearest-rank percentile, p in (0, 1]. Zero for an empty vector.
int64_t nearest_rank(std::vector<int64_t> values, double p);

constexpr std::string_view kMetricsSchema = "kvaccel-metrics/1";
constexpr std::string_view kReportSchema = "kvaccel-report/1";

std::string metrics_csv(const std::vector<MetricsSample>& samples);
// Throws std::runtime_error on a schema mismatch or malformed row.
std::vector<MetricsSample> parse_metrics_csv(std::string_view text);

// Two-column key,value listing of every report field.
std::string report_csv(const RunReport& r);
std::string report_text(const RunReport& r);

struct CdfPoint {
  double utilization;
  double fraction;  // P(U <= utilization)
  bool operator==(const CdfPoint&) const = default;
};

// Empirical CDF of link utilization over the stall intervals. Throws
// std::invalid_argument if there are none.
std::vector<CdfPoint> utilization_cdf(const std::vector<MetricsSample>& samples);
// Step-function value of a CDF at x.
double cdf_at(const std::vector<CdfPoint>& cdf, double x);
std::string cdf_csv(const std::vector<CdfPoint>& cdf);

// Side-by-side table; deltas are relative to the first report.
std::string compare_table(const std::vector<RunReport>& reports);

}  // namespace kvaccel::bench
