#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>

#include "kvaccel/accel/accel_store.h"
#include "kvaccel/device/bulk_scan.h"

namespace kvaccel::testing {

// A small store whose host LSM stalls after one memtable rotation until the
// flush completes, so tests control stall episodes by withholding time.
inline Config small_config() {
  Config c;
  c.sim.device_capacity = 100'000'000;
  c.device.total_pages = 16384;  // 64 MiB, 16 MiB kv region
  c.lsm.memtable_bytes = 16 * 1024;
  c.lsm.max_immutable = 1;
  c.lsm.level1_bytes = 64 * 1024;
  c.lsm.sst_target_bytes = 16 * 1024;
  c.lsm.l0_slowdown = 100;
  c.lsm.l0_stop = 200;
  c.lsm.pending_soft_bytes = 1ull << 40;
  c.lsm.pending_hard_bytes = 1ull << 40;
  c.accel.rollback_enabled = false;
  return c;
}

inline std::string key_of(uint32_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "k%07u", k);
  return buf;
}

// Writes filler keys until one is redirected; the host LSM is then stalled.
inline void force_stall(AccelStore& s, uint32_t& next_filler) {
  for (int i = 0; i < 100'000; ++i) {
    auto r = s.put("f" + std::to_string(next_filler++), std::string(200, 'f'));
    if (r.route == Route::kDev) return;
  }
  throw std::runtime_error("store never stalled");
}

// Lets background work finish and the detector publish the new verdict.
inline void unstall(AccelStore& s) {
  s.settle();
  s.advance(s.config().accel.detector_period_ms * 1000);
}

// Latest version of every key on the device (tombstones included).
inline std::map<std::string, Entry> device_contents(AccelStore& s) {
  std::map<std::string, Entry> out;
  if (s.device().dev_lsm().empty()) return out;
  auto scan = s.device().scan_bulk("", std::nullopt);
  for (auto& e : device::parse_chunks(scan.chunks)) out[e.key] = e;
  return out;
}

// Keys whose newest version across both LSMs is on the device.
inline std::vector<std::string> keys_newest_on_device(AccelStore& s) {
  std::vector<std::string> out;
  for (auto& [k, e] : device_contents(s)) {
    auto host = s.lsm().get_version(k, nullptr);
    if (!host || host->seq < e.seq) out.push_back(k);
  }
  return out;
}

}  // namespace kvaccel::testing

namespace kvaccel {
inline void PrintTo(const KeyValue& kv, std::ostream* os) {
  *os << "{" << kv.key << ", " << kv.value.substr(0, 12) << (kv.value.size() > 12 ? "..." : "") << "}";
}
}  // namespace kvaccel
