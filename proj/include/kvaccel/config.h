#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kvaccel {

// Thrown for malformed configuration files and out-of-range settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Policy { kBaselineStall, kBaselineSlowdown, kKvAccel };
enum class RollbackMode { kEager, kLazy };

std::string_view to_string(Policy p);
std::string_view to_string(RollbackMode m);
Policy parse_policy(std::string_view s);
RollbackMode parse_rollback_mode(std::string_view s);

struct SimOptions {
  uint64_t bus_capacity = 4'000'000'000;     // bytes/s
  uint64_t device_capacity = 630'000'000;    // bytes/s
  // Host CPU time of a compaction merge, per input byte. Negative selects
  // auto calibration: the CPU phase lasts as long as the job's transfers
  // would take on an idle device.
  double compaction_cpu_ns_per_byte = -1.0;
  uint64_t seed = 1;
  uint32_t host_cores = 8;
};

struct DeviceOptions {
  uint32_t page_size = 4096;
  uint64_t total_pages = 65536;  // 256 MiB
  double block_fraction = 0.75;
  uint64_t disaggregation_point = 0;  // page index; 0 derives it from block_fraction
  uint64_t dev_memtable_bytes = 256 * 1024;
  uint64_t dev_capacity_bytes = 0;  // 0 = whole kv region
  bool dev_flush = true;
  bool dev_compaction = true;
  uint32_t dev_tier_fanout = 4;
  int64_t kv_cmd_overhead_us = 20;

  uint64_t dp() const;
};

struct LsmOptions {
  uint64_t memtable_bytes = 1 << 20;
  uint32_t max_immutable = 2;
  uint32_t l0_compaction_trigger = 2;
  uint32_t l0_slowdown = 4;
  uint32_t l0_stop = 8;
  uint64_t pending_soft_bytes = 16ull << 20;
  uint64_t pending_hard_bytes = 64ull << 20;
  uint64_t level1_bytes = 4ull << 20;
  uint32_t level_ratio = 10;
  uint32_t num_levels = 7;
  uint64_t sst_target_bytes = 1 << 20;
  uint32_t compaction_workers = 1;
  int64_t slowdown_sleep_us = 1000;
  // Fixed per-entry bookkeeping charged against memtable capacity.
  uint32_t entry_overhead = 16;
};

struct AccelOptions {
  Policy policy = Policy::kKvAccel;
  RollbackMode rollback_mode = RollbackMode::kEager;
  bool rollback_enabled = true;
  int64_t detector_period_ms = 100;
  bool redirect_on_slowdown = false;
  int64_t lazy_quiet_ms = 2000;
  int64_t rollback_record_us = 2;
};

struct HostOptions {
  int64_t put_us = 10;
  int64_t get_us = 5;
  int64_t next_us = 1;
};

struct WorkloadOptions {
  uint64_t key_space = 50'000;
  uint32_t key_size = 4;
  uint32_t value_size = 4096;
  double duration_s = 60.0;
  uint64_t max_ops = 0;  // 0 = bounded by duration only
  uint64_t preload_keys = 20'000;
  uint32_t range_next = 1024;
};

// Every tunable of a simulated run. Files use one `key = value` pair per
// line; `#` starts a comment. See README.md for the key list.
struct Config {
  SimOptions sim;
  DeviceOptions device;
  LsmOptions lsm;
  AccelOptions accel;
  HostOptions host;
  WorkloadOptions workload;

  // Desk-scale profile used by the benchmark driver: a slowed-down device so
  // that stalls last whole seconds while a run stays under ~1e5 operations.
  static Config desk();

  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  void load_file(const std::filesystem::path& path);
  void load_string(std::string_view text);
  std::string dump() const;
  static std::vector<std::string> keys();

  void validate() const;
};

}  // namespace kvaccel
