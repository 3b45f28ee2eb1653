#include "kvaccel/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace kvaccel {

std::string_view to_string(Policy p) {
  switch (p) {
    case Policy::kBaselineStall:
      return "baseline-stall";
    case Policy::kBaselineSlowdown:
      return "baseline-slowdown";
    case Policy::kKvAccel:
      return "kvaccel";
  }
  return "?";
}

std::string_view to_string(RollbackMode m) {
  return m == RollbackMode::kEager ? "eager" : "lazy";
}

Policy parse_policy(std::string_view s) {
  if (s == "baseline-stall") return Policy::kBaselineStall;
  if (s == "baseline-slowdown") return Policy::kBaselineSlowdown;
  if (s == "kvaccel") return Policy::kKvAccel;
  throw ConfigError("unknown policy '" + std::string(s) + "'");
}

RollbackMode parse_rollback_mode(std::string_view s) {
  if (s == "eager") return RollbackMode::kEager;
  if (s == "lazy") return RollbackMode::kLazy;
  throw ConfigError("unknown rollback mode '" + std::string(s) + "'");
}

uint64_t DeviceOptions::dp() const {
  if (disaggregation_point != 0) return disaggregation_point;
  return static_cast<uint64_t>(std::floor(static_cast<double>(total_pages) * block_fraction));
}

namespace {

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("bad value '" + std::string(v) + "' for " + std::string(key));
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  if (v == "auto") return -1.0;
  try {
    size_t pos = 0;
    std::string s(v);
    double d = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("bad value '" + std::string(v) + "' for " + std::string(key));
  }
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("bad boolean '" + std::string(v) + "' for " + std::string(key));
}

std::string fmt_double(double d) {
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

struct Field {
  const char* key;
  std::function<void(Config&, std::string_view)> set;
  std::function<std::string(const Config&)> get;
};

#define KV_UINT(name, member)                                                      \
  Field {                                                                          \
    name,                                                                          \
        [](Config& c, std::string_view v) {                                        \
          c.member = parse_number<std::decay_t<decltype(c.member)>>(name, v);      \
        },                                                                         \
        [](const Config& c) { return std::to_string(c.member); }                   \
  }
#define KV_DOUBLE(name, member)                                             \
  Field {                                                                   \
    name, [](Config& c, std::string_view v) { c.member = parse_double(name, v); }, \
        [](const Config& c) { return fmt_double(c.member); }                \
  }
#define KV_BOOL(name, member)                                                    \
  Field {                                                                        \
    name, [](Config& c, std::string_view v) { c.member = parse_bool(name, v); }, \
        [](const Config& c) { return std::string(c.member ? "true" : "false"); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = {
      KV_UINT("bus_capacity", sim.bus_capacity),
      KV_UINT("device_capacity", sim.device_capacity),
      KV_DOUBLE("compaction_cpu_ns_per_byte", sim.compaction_cpu_ns_per_byte),
      KV_UINT("seed", sim.seed),
      KV_UINT("host_cores", sim.host_cores),

      KV_UINT("page_size", device.page_size),
      KV_UINT("total_pages", device.total_pages),
      KV_DOUBLE("block_fraction", device.block_fraction),
      KV_UINT("disaggregation_point", device.disaggregation_point),
      KV_UINT("dev_memtable_bytes", device.dev_memtable_bytes),
      KV_UINT("dev_capacity_bytes", device.dev_capacity_bytes),
      KV_BOOL("dev_flush", device.dev_flush),
      KV_BOOL("dev_compaction", device.dev_compaction),
      KV_UINT("dev_tier_fanout", device.dev_tier_fanout),
      KV_UINT("kv_cmd_overhead_us", device.kv_cmd_overhead_us),

      KV_UINT("memtable_bytes", lsm.memtable_bytes),
      KV_UINT("max_immutable", lsm.max_immutable),
      KV_UINT("l0_compaction_trigger", lsm.l0_compaction_trigger),
      KV_UINT("l0_slowdown", lsm.l0_slowdown),
      KV_UINT("l0_stop", lsm.l0_stop),
      KV_UINT("pending_soft_bytes", lsm.pending_soft_bytes),
      KV_UINT("pending_hard_bytes", lsm.pending_hard_bytes),
      KV_UINT("level1_bytes", lsm.level1_bytes),
      KV_UINT("level_ratio", lsm.level_ratio),
      KV_UINT("num_levels", lsm.num_levels),
      KV_UINT("sst_target_bytes", lsm.sst_target_bytes),
      KV_UINT("compaction_workers", lsm.compaction_workers),
      KV_UINT("slowdown_sleep_us", lsm.slowdown_sleep_us),
      KV_UINT("entry_overhead", lsm.entry_overhead),

      Field{"policy", [](Config& c, std::string_view v) { c.accel.policy = parse_policy(v); },
            [](const Config& c) { return std::string(to_string(c.accel.policy)); }},
      Field{"rollback_mode",
            [](Config& c, std::string_view v) { c.accel.rollback_mode = parse_rollback_mode(v); },
            [](const Config& c) { return std::string(to_string(c.accel.rollback_mode)); }},
      KV_BOOL("rollback_enabled", accel.rollback_enabled),
      KV_UINT("detector_period_ms", accel.detector_period_ms),
      KV_BOOL("redirect_on_slowdown", accel.redirect_on_slowdown),
      KV_UINT("lazy_quiet_ms", accel.lazy_quiet_ms),
      KV_UINT("rollback_record_us", accel.rollback_record_us),

      KV_UINT("host_put_us", host.put_us),
      KV_UINT("host_get_us", host.get_us),
      KV_UINT("host_next_us", host.next_us),

      KV_UINT("key_space", workload.key_space),
      KV_UINT("key_size", workload.key_size),
      KV_UINT("value_size", workload.value_size),
      KV_DOUBLE("duration_s", workload.duration_s),
      KV_UINT("max_ops", workload.max_ops),
      KV_UINT("preload_keys", workload.preload_keys),
      KV_UINT("range_next", workload.range_next),
  };
  return kFields;
}

#undef KV_UINT
#undef KV_DOUBLE
#undef KV_BOOL

const Field& find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (key == f.key) return f;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

Config Config::desk() {
  Config c;
  c.sim.device_capacity = 32'000'000;
  c.sim.bus_capacity = 200'000'000;
  c.device.total_pages = 524288;  // 2 GiB
  c.lsm.level1_bytes = 16ull << 20;
  c.host.put_us = 600;
  c.host.get_us = 300;
  c.host.next_us = 5;
  c.device.kv_cmd_overhead_us = 100;
  c.accel.rollback_record_us = 20;
  return c;
}

void Config::set(std::string_view key, std::string_view value) {
  find_field(trim(key)).set(*this, trim(value));
}

std::string Config::get(std::string_view key) const { return find_field(key).get(*this); }

void Config::load_string(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    set(std::string_view(t).substr(0, eq), std::string_view(t).substr(eq + 1));
  }
}

void Config::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  load_string(ss.str());
}

std::string Config::dump() const {
  std::string out;
  for (const auto& f : fields()) {
    out += f.key;
    out += " = ";
    out += f.get(*this);
    out += '\n';
  }
  return out;
}

std::vector<std::string> Config::keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  return out;
}

void Config::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(sim.bus_capacity > 0 && sim.device_capacity > 0, "capacities must be positive");
  require(sim.host_cores > 0, "host_cores must be positive");
  require(device.page_size >= 64, "page_size too small");
  require(device.total_pages > 1, "total_pages too small");
  require(device.dp() > 0 && device.dp() < device.total_pages,
          "disaggregation point must split the device into two non-empty regions");
  require(device.dev_memtable_bytes > 0, "dev_memtable_bytes must be positive");
  require(device.dev_tier_fanout >= 2, "dev_tier_fanout must be >= 2");
  require(lsm.memtable_bytes > 0, "memtable_bytes must be positive");
  require(lsm.max_immutable >= 1, "max_immutable must be >= 1");
  require(lsm.l0_compaction_trigger >= 1, "l0_compaction_trigger must be >= 1");
  require(lsm.l0_slowdown <= lsm.l0_stop, "l0_slowdown must not exceed l0_stop");
  require(lsm.pending_soft_bytes <= lsm.pending_hard_bytes,
          "pending_soft_bytes must not exceed pending_hard_bytes");
  require(lsm.level_ratio >= 2, "level_ratio must be >= 2");
  require(lsm.num_levels >= 2, "num_levels must be >= 2");
  require(lsm.compaction_workers >= 1, "compaction_workers must be >= 1");
  require(lsm.sst_target_bytes > 0, "sst_target_bytes must be positive");
  require(accel.detector_period_ms > 0, "detector_period_ms must be positive");
  require(workload.key_size >= 1 && workload.key_size <= 8, "key_size must be in [1, 8]");
  require(workload.key_space >= 1, "key_space must be positive");
  require(workload.duration_s >= 0.0, "duration_s must be non-negative");
}

}  // namespace kvaccel
