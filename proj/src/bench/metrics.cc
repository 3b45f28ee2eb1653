#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "kvaccel/bench/workload.h"

namespace kvaccel::bench {

namespace {

template <typename T>
T number(const std::string& s) {
  T v{};
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw std::invalid_argument(s);
  return v;
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

constexpr const char* kColumns =
    "interval,writes,reads,ranges,reads_main,reads_dev,redirected,blocked_returns,"
    "slowdown_sleeps,stall_blocked_us,ticks,stall_ticks,slowdown_ticks,block_h2d,block_d2h,"
    "kv_h2d,kv_d2h,internal,link_util,bg_cpu_us,fg_cpu_us";

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (true) {
    size_t next = line.find(sep, pos);
    out.emplace_back(line.substr(pos, next == std::string_view::npos ? next : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

}  // namespace

std::string metrics_csv(const std::vector<MetricsSample>& samples) {
  std::ostringstream out;
  out << "# schema: " << kMetricsSchema << "\n" << kColumns << "\n";
  for (const auto& s : samples) {
    out << s.interval << ',' << s.writes << ',' << s.reads << ',' << s.ranges << ','
        << s.reads_main << ',' << s.reads_dev << ',' << s.redirected << ',' << s.blocked_returns
        << ',' << s.slowdown_sleeps << ',' << s.stall_blocked_us << ',' << s.ticks << ','
        << s.stall_ticks << ',' << s.slowdown_ticks << ',' << s.block_h2d << ',' << s.block_d2h
        << ',' << s.kv_h2d << ',' << s.kv_d2h << ',' << s.internal << ',' << fixed(s.link_util)
        << ',' << s.bg_cpu_us << ',' << s.fg_cpu_us << '\n';
  }
  return out.str();
}

std::vector<MetricsSample> parse_metrics_csv(std::string_view text) {
  std::vector<MetricsSample> out;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "# schema: " + std::string(kMetricsSchema)) {
    throw std::runtime_error("not a metrics file (expected schema " + std::string(kMetricsSchema) + ")");
  }
  if (!std::getline(in, line) || line != kColumns) throw std::runtime_error("unexpected metrics header");
  int lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split(line, ',');
    if (f.size() != 21) throw std::runtime_error("line " + std::to_string(lineno) + ": wrong column count");
    try {
      MetricsSample s;
      size_t i = 0;
      auto u = [&] { return number<uint64_t>(f[i++]); };
      auto l = [&] { return number<int64_t>(f[i++]); };
      s.interval = u();
      s.writes = u();
      s.reads = u();
      s.ranges = u();
      s.reads_main = u();
      s.reads_dev = u();
      s.redirected = u();
      s.blocked_returns = u();
      s.slowdown_sleeps = u();
      s.stall_blocked_us = l();
      s.ticks = static_cast<uint32_t>(u());
      s.stall_ticks = static_cast<uint32_t>(u());
      s.slowdown_ticks = static_cast<uint32_t>(u());
      s.block_h2d = u();
      s.block_d2h = u();
      s.kv_h2d = u();
      s.kv_d2h = u();
      s.internal = u();
      size_t used = 0;
      s.link_util = std::stod(f[i], &used);
      if (used != f[i++].size()) throw std::invalid_argument("trailing characters");
      s.bg_cpu_us = l();
      s.fg_cpu_us = l();
      out.push_back(s);
    } catch (const std::logic_error&) {
      throw std::runtime_error("line " + std::to_string(lineno) + ": malformed number");
    }
  }
  return out;
}

std::string report_csv(const RunReport& r) {
  std::ostringstream o;
  o << "# schema: " << kReportSchema << "\nfield,value\n";
  auto row = [&](const char* k, const auto& v) { o << k << ',' << v << '\n'; };
  row("workload", r.workload);
  row("policy", r.policy);
  row("rollback_mode", r.rollback_mode);
  row("seed", r.seed);
  row("duration_s", fixed(r.duration_s, 3));
  row("compaction_workers", r.compaction_workers);
  row("writes", r.writes);
  row("reads", r.reads);
  row("ranges", r.ranges);
  row("preload_writes", r.preload_writes);
  row("ops_per_s", fixed(r.ops_per_s, 3));
  row("write_mb_per_s", fixed(r.write_mb_per_s, 4));
  row("p99_write_us", r.p99_write_us);
  row("p99_read_us", r.p99_read_us);
  row("p99_range_us", r.p99_range_us);
  row("cpu_pct", fixed(r.cpu_pct, 4));
  row("efficiency", fixed(r.efficiency, 4));
  row("zero_intervals", r.zero_intervals);
  row("stall_intervals", r.stall_intervals);
  row("stall_episodes", r.stall_episodes);
  row("slowdown_events", r.slowdown_events);
  row("blocked_returns", r.blocked_returns);
  row("redirected", r.redirected);
  row("reads_main", r.reads_main);
  row("reads_dev", r.reads_dev);
  row("rollbacks", r.rollbacks);
  row("rollback_bytes", r.rollback_bytes);
  row("rollback_passes", r.rollback_passes);
  row("rollback_pauses", r.rollback_pauses);
  row("rollback_merged", r.rollback_merged);
  row("rollback_stale", r.rollback_stale);
  row("block_h2d", r.block_h2d);
  row("block_d2h", r.block_d2h);
  row("kv_h2d", r.kv_h2d);
  row("kv_d2h", r.kv_d2h);
  row("internal", r.internal);
  row("invariant_violations", r.invariant_violations);
  return o.str();
}

std::string report_text(const RunReport& r) {
  std::ostringstream o;
  o << "workload " << r.workload << "  policy " << r.policy;
  if (r.policy == "kvaccel") o << " (" << r.rollback_mode << " rollback)";
  o << "  seed " << r.seed << "  " << fixed(r.duration_s, 1) << " s virtual\n";
  o << "CPU usage is the share of virtual time spent in flush/compaction/rollback CPU phases\n"
       "across host_cores; efficiency = write MB/s / CPU %.\n";
  o << "  writes " << r.writes << "  reads " << r.reads << "  ranges " << r.ranges << "\n";
  o << "  throughput " << fixed(r.ops_per_s, 1) << " ops/s, " << fixed(r.write_mb_per_s, 2)
    << " MB/s written\n";
  o << "  p99 latency us: write " << r.p99_write_us << "  read " << r.p99_read_us << "  range "
    << r.p99_range_us << "\n";
  o << "  cpu " << fixed(r.cpu_pct, 2) << " %  efficiency " << fixed(r.efficiency, 3) << "\n";
  o << "  zero-throughput intervals " << r.zero_intervals << "  stall intervals "
    << r.stall_intervals << "  stall episodes " << r.stall_episodes << "  slowdowns "
    << r.slowdown_events << "  blocked puts " << r.blocked_returns << "\n";
  o << "  redirected " << r.redirected << "  reads main/dev " << r.reads_main << "/" << r.reads_dev
    << "  rollbacks " << r.rollbacks << " (" << r.rollback_bytes << " bytes, "
    << r.rollback_passes << " passes, " << r.rollback_pauses << " pauses, " << r.rollback_merged
    << " merged, " << r.rollback_stale << " stale)\n";
  o << "  bytes block h2d/d2h " << r.block_h2d << "/" << r.block_d2h << "  kv h2d/d2h " << r.kv_h2d
    << "/" << r.kv_d2h << "  internal " << r.internal << "\n";
  if (r.invariant_violations > 0) {
    o << "  INVARIANT VIOLATIONS: " << r.invariant_violations << "\n";
    for (const auto& v : r.violations) o << "    " << v << "\n";
  }
  return o.str();
}

std::vector<CdfPoint> utilization_cdf(const std::vector<MetricsSample>& samples) {
  std::vector<double> u;
  for (const auto& s : samples) {
    if (s.stalled()) u.push_back(s.link_util);
  }
  if (u.empty()) throw std::invalid_argument("no stall intervals in input");
  std::sort(u.begin(), u.end());
  std::vector<CdfPoint> out;
  for (size_t i = 0; i < u.size(); ++i) {
    double f = static_cast<double>(i + 1) / static_cast<double>(u.size());
    if (!out.empty() && out.back().utilization == u[i]) {
      out.back().fraction = f;
    } else {
      out.push_back({u[i], f});
    }
  }
  return out;
}

double cdf_at(const std::vector<CdfPoint>& cdf, double x) {
  double f = 0;
  for (const auto& p : cdf) {
    if (p.utilization > x) break;
    f = p.fraction;
  }
  return f;
}

std::string cdf_csv(const std::vector<CdfPoint>& cdf) {
  std::ostringstream o;
  o << "utilization,fraction\n";
  for (const auto& p : cdf) o << fixed(p.utilization) << ',' << fixed(p.fraction) << '\n';
  return o.str();
}

std::string compare_table(const std::vector<RunReport>& reports) {
  if (reports.empty()) return {};
  struct Metric {
    const char* name;
    double (*get)(const RunReport&);
  };
  static const Metric metrics[] = {
      {"writes", [](const RunReport& r) { return double(r.writes); }},
      {"reads", [](const RunReport& r) { return double(r.reads); }},
      {"ranges", [](const RunReport& r) { return double(r.ranges); }},
      {"ops/s", [](const RunReport& r) { return r.ops_per_s; }},
      {"write MB/s", [](const RunReport& r) { return r.write_mb_per_s; }},
      {"p99 write us", [](const RunReport& r) { return double(r.p99_write_us); }},
      {"p99 read us", [](const RunReport& r) { return double(r.p99_read_us); }},
      {"cpu %", [](const RunReport& r) { return r.cpu_pct; }},
      {"efficiency", [](const RunReport& r) { return r.efficiency; }},
      {"zero intervals", [](const RunReport& r) { return double(r.zero_intervals); }},
      {"stall intervals", [](const RunReport& r) { return double(r.stall_intervals); }},
      {"slowdowns", [](const RunReport& r) { return double(r.slowdown_events); }},
      {"main read share", [](const RunReport& r) { return r.main_read_fraction(); }},
  };
  std::ostringstream o;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-18s", "");
  o << buf;
  for (const auto& r : reports) {
    std::string label = r.workload + "/" + r.policy;
    if (r.policy == "kvaccel") label += "-" + r.rollback_mode.substr(0, 1);
    std::snprintf(buf, sizeof buf, " %24s", label.c_str());
    o << buf;
  }
  o << "\n";
  for (const auto& m : metrics) {
    std::snprintf(buf, sizeof buf, "%-18s", m.name);
    o << buf;
    const double base = m.get(reports.front());
    for (size_t i = 0; i < reports.size(); ++i) {
      double v = m.get(reports[i]);
      std::string cell = fixed(v, v == static_cast<int64_t>(v) ? 0 : 3);
      if (i > 0 && base != 0) cell += " (" + std::string(v >= base ? "+" : "") + fixed((v / base - 1) * 100, 1) + "%)";
      std::snprintf(buf, sizeof buf, " %24s", cell.c_str());
      o << buf;
    }
    o << "\n";
  }
  for (const auto& r : reports) {
    if (r.zero_intervals > 0) {
      o << "! " << r.workload << "/" << r.policy << " had " << r.zero_intervals
        << " zero-throughput interval(s)\n";
    }
  }
  return o.str();
}

}  // namespace kvaccel::bench
