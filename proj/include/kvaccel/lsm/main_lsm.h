#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kvaccel/config.h"
#include "kvaccel/device/hybrid_device.h"
#include "kvaccel/device/pages.h"
#include "kvaccel/lsm/iterator.h"
#include "kvaccel/lsm/sstable.h"
#include "kvaccel/sim/simulator.h"

namespace kvaccel {

enum class Verdict : uint8_t { kNormal, kSlowdown, kStall };
enum class StallReason : uint8_t { kNone, kFlushBacklog, kL0Stop, kPendingBytes };

std::string_view to_string(Verdict v);
std::string_view to_string(StallReason r);

struct StallStatus {
  uint32_t l0_count = 0;
  uint32_t imm_count = 0;
  uint64_t pending_compaction_bytes = 0;
  Verdict verdict = Verdict::kNormal;
  StallReason reason = StallReason::kNone;  // first stop condition that holds
};

struct PutOutcome {
  bool blocked = false;
  StallReason reason = StallReason::kNone;
  sim::SimTime delay_us = 0;  // slowdown sleep owed by the writer
};

struct MemTable {
  MemMap map;
  uint64_t bytes = 0;
};
using MemPtr = std::shared_ptr<MemTable>;

struct LsmCounters {
  uint64_t puts = 0;
  uint64_t blocked[4] = {0, 0, 0, 0};  // by StallReason
  uint64_t slowdown_delays = 0;
  uint64_t flushes = 0;
  uint64_t compactions = 0;
  uint64_t compaction_bytes_read = 0;
  uint64_t compaction_bytes_written = 0;
  uint64_t flush_bytes = 0;
};

// Host LSM-tree over the device's block interface. Data changes are applied
// synchronously; flush and compaction are multi-phase activities in virtual
// time and publish their results when their last phase completes.
class MainLsm {
 public:
  MainLsm(const LsmOptions& opts, bool slowdown_enabled, sim::Simulator& sim,
          device::HybridDevice& dev);
  MainLsm(const MainLsm&) = delete;
  MainLsm& operator=(const MainLsm&) = delete;

  PutOutcome put_local(const Entry& e);
  // Highest-seq live version, or nothing for absent/deleted keys.
  std::optional<Entry> get_local(std::string_view key, sim::IoCost* cost);
  // Highest-seq version including tombstones.
  std::optional<Entry> get_version(std::string_view key, sim::IoCost* cost);

  StallStatus stall_status() const;

  // Merged view including tombstones.
  std::unique_ptr<EntryIterator> new_iterator(sim::IoCost* cost);

  // Fires after every flush or compaction install and memtable rotation.
  void on_state_change(std::function<void()> cb) { listeners_.push_back(std::move(cb)); }
  // Bottom-level compactions drop tombstones only while this returns true.
  // Older copies of a key held outside this LSM need the tombstone kept.
  void set_tombstone_drop_allowed(std::function<bool()> pred) { drop_allowed_ = std::move(pred); }

  // Rotates a non-empty active memtable so that it gets flushed.
  void force_flush();
  bool background_idle() const;

  // Throws std::logic_error naming the first violated structural invariant.
  void check_invariants() const;

  const LsmOptions& options() const { return opts_; }
  const LsmCounters& counters() const { return counters_; }
  uint64_t level_bytes(size_t level) const;
  uint64_t level_target(size_t level) const;
  size_t level_files(size_t level) const { return levels_.at(level).size(); }
  const std::vector<SstPtr>& level(size_t i) const { return levels_.at(i); }
  size_t num_levels() const { return levels_.size(); }
  const MemTable& active() const { return *active_; }
  size_t immutable_count() const { return imms_.size(); }
  uint64_t block_pages_used() const { return alloc_.used_pages(); }
  uint32_t running_compactions() const { return running_compactions_; }

 private:
  struct CompactionJob;

  void rotate();
  void maybe_schedule_flush();
  void maybe_schedule_compaction();
  std::unique_ptr<CompactionJob> pick_compaction();
  void run_compaction(std::shared_ptr<CompactionJob> job);
  void install_compaction(const CompactionJob& job);
  std::vector<device::Extent> write_image(const std::vector<uint8_t>& image, sim::IoCost* cost);
  void release(const std::vector<device::Extent>& extents);
  void notify();
  uint64_t pending_compaction_bytes() const;
  bool is_bottom(size_t level) const;

  LsmOptions opts_;
  bool slowdown_enabled_;
  sim::Simulator& sim_;
  device::HybridDevice& dev_;
  device::PageAllocator alloc_;

  MemPtr active_;
  std::deque<MemPtr> imms_;  // oldest first
  std::vector<std::vector<SstPtr>> levels_;
  std::vector<std::string> compact_pointer_;
  uint64_t next_sst_id_ = 1;
  bool flush_running_ = false;
  bool l0_compaction_running_ = false;
  uint32_t running_compactions_ = 0;
  std::vector<std::function<void()>> listeners_;
  std::function<bool()> drop_allowed_;
  LsmCounters counters_;
};

}  // namespace kvaccel
