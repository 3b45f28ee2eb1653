#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kvaccel/accel/metadata_table.h"
#include "kvaccel/config.h"
#include "kvaccel/device/hybrid_device.h"
#include "kvaccel/lsm/main_lsm.h"
#include "kvaccel/sim/simulator.h"

namespace kvaccel {

enum class Route : uint8_t { kMain, kDev };

struct WriteResult {
  bool blocked = false;
  StallReason reason = StallReason::kNone;
  Route route = Route::kMain;
  uint64_t seq = 0;
  sim::IoCost cost;            // host CPU plus any device command
  sim::SimTime delay_us = 0;   // slowdown sleep before the write counts as done
};

struct ReadResult {
  std::optional<std::string> value;
  Route route = Route::kMain;
  sim::IoCost cost;
};

struct KeyValue {
  std::string key;
  std::string value;
  bool operator==(const KeyValue&) const = default;
};

struct AccelCounters {
  uint64_t detector_ticks = 0;
  uint64_t redirected_writes = 0;
  uint64_t escalations = 0;        // blocked host writes redirected between ticks
  uint64_t device_full = 0;
  uint64_t dev_reads = 0;
  uint64_t main_reads = 0;
  uint64_t rollbacks_started = 0;
  uint64_t rollbacks_completed = 0;
  uint64_t rollback_passes = 0;
  uint64_t rollback_pauses = 0;
  uint64_t rollback_chunks = 0;
  uint64_t rollback_bytes = 0;
  uint64_t rollback_merged = 0;
  uint64_t rollback_stale = 0;
};

// Outcome of the most recent finished rollback.
struct RollbackReport {
  uint64_t merged = 0;
  uint64_t stale = 0;
  uint64_t chunks = 0;
  uint64_t passes = 0;
  uint64_t pauses = 0;
};

// The full engine: simulator, dual-interface device, host LSM, and the
// detector / controller / metadata / rollback machinery on top.
//
// put/get/del/range apply their data effect immediately and return the
// resource cost; callers that model time run that cost through
// sim().execute(). Background activity (flush, compaction, detector ticks,
// rollback) advances only while the event loop runs.
class AccelStore {
 public:
  explicit AccelStore(const Config& cfg);
  ~AccelStore();
  AccelStore(const AccelStore&) = delete;
  AccelStore& operator=(const AccelStore&) = delete;

  WriteResult put(std::string_view key, std::string_view value);
  WriteResult del(std::string_view key);
  ReadResult get(std::string_view key);
  // Seek to `start` plus up to n Next calls over both LSMs.
  std::vector<KeyValue> range(std::string_view start, size_t n, sim::IoCost* cost = nullptr);

  // Last verdict published by the detector.
  const StallStatus& published() const { return published_; }
  StallStatus stall_status() const { return lsm_->stall_status(); }

  // Runs a full rollback now and returns the number of merged records.
  // Throws std::logic_error while the published verdict is stall.
  uint64_t rollback_execute();
  // Starts a rollback without running the loop. False if one is running, the
  // Dev-LSM is empty, or the published verdict is stall.
  bool rollback_start();
  bool rollback_active() const;
  const RollbackReport& last_rollback() const { return last_rollback_; }

  // Loses host memory state that a crash would lose (metadata table and any
  // in-flight rollback); device contents survive.
  void simulate_crash();
  // Rebuilds the metadata table from a full device scan. Returns its size.
  size_t recover_metadata();

  // Runs the loop for `us` of virtual time.
  void advance(sim::SimTime us);
  // Runs until flush/compaction are idle and no rollback is running.
  // Returns false if that did not happen within `limit_us`.
  bool settle(sim::SimTime limit_us = 3600 * sim::kMicrosPerSecond);

  // One-shot callback for the next host LSM state change.
  void when_state_changes(std::function<void()> cb);

  // Monotonic count of data mutations (writes, rollback merges, resets).
  uint64_t mutations() const { return mutations_; }
  uint64_t last_seq() const { return seq_; }

  const Config& config() const { return cfg_; }
  sim::Simulator& sim() { return *sim_; }
  const sim::Simulator& sim() const { return *sim_; }
  device::HybridDevice& device() { return *dev_; }
  const device::HybridDevice& device() const { return *dev_; }
  MainLsm& lsm() { return *lsm_; }
  const MainLsm& lsm() const { return *lsm_; }
  MetadataTable& metadata() { return metadata_; }
  const MetadataTable& metadata() const { return metadata_; }
  const AccelCounters& counters() const { return counters_; }

 private:
  struct RollbackJob;

  WriteResult write(Entry e);
  bool try_redirect(const Entry& e, WriteResult* out);
  void detector_tick();
  void maybe_start_rollback();
  void start_rollback();
  void begin_pass();
  void deliver_chunk();
  void merge_chunk();
  void after_chunk();
  void finish_rollback();
  void on_lsm_change();

  Config cfg_;
  std::unique_ptr<sim::Simulator> sim_;
  std::unique_ptr<device::HybridDevice> dev_;
  std::unique_ptr<MainLsm> lsm_;
  MetadataTable metadata_;

  StallStatus published_;
  bool escalated_ = false;
  bool device_full_ = false;
  uint64_t seq_ = 0;
  uint64_t mutations_ = 0;
  sim::SimTime last_client_write_ = 0;
  std::vector<std::function<void()>> waiters_;

  std::unique_ptr<RollbackJob> job_;
  uint64_t job_generation_ = 0;
  RollbackReport last_rollback_;
  AccelCounters counters_;
};

}  // namespace kvaccel
