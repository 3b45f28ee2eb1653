#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kvaccel/config.h"
#include "kvaccel/device/media.h"
#include "kvaccel/device/pages.h"
#include "kvaccel/lsm/iterator.h"
#include "kvaccel/lsm/sstable.h"

namespace kvaccel::device {

// LSM running inside the device over the kv region: one memtable plus a
// newest-first list of sorted runs. With compaction enabled, runs are merged
// size-tiered: `fanout` runs of one tier become a single run of the next.
// Tombstones are always kept, since the host decides what they shadow.
class DevLsm {
 public:
  struct Run {
    SstPtr table;
    uint32_t tier = 0;
  };

  DevLsm(const DeviceOptions& opts, MediaStore& media, PageAllocator& alloc, PageSource& internal);

  // Returns false (and changes nothing) if the entry would not fit.
  // Flush and compaction traffic triggered by the put lands in `background`.
  bool put(const Entry& e, sim::IoCost* background);

  // Latest version of key, tombstones included. Charges one probe per run
  // consulted into `cost`.
  std::optional<Entry> get(std::string_view key, sim::IoCost* cost);

  // Merged, seq-resolved view. Invalid after the next mutation.
  std::unique_ptr<EntryIterator> new_iterator(sim::IoCost* cost);

  void reset();
  // Forces the memtable into a run (no-op when empty or flush is disabled).
  void flush(sim::IoCost* background);

  bool empty() const { return mem_.empty() && runs_.empty(); }
  const std::optional<std::string>& min_key() const { return min_key_; }
  const std::optional<std::string>& max_key() const { return max_key_; }
  uint64_t memtable_bytes() const { return mem_bytes_; }
  size_t memtable_entries() const { return mem_.size(); }
  const std::vector<Run>& runs() const { return runs_; }
  uint64_t capacity_pages() const { return capacity_pages_; }
  uint64_t used_pages() const { return alloc_.used_pages(); }
  uint64_t mutations() const { return mutations_; }
  uint64_t flushes() const { return flushes_; }
  uint64_t compactions() const { return compactions_; }

  // Image support: raw memtable contents and run restoration.
  const MemMap& memtable() const { return mem_; }
  void restore(std::vector<Entry> memtable, std::vector<std::pair<uint32_t, std::vector<Extent>>> runs,
               uint64_t next_run_id, std::optional<std::string> min_key,
               std::optional<std::string> max_key);
  uint64_t next_run_id() const { return next_run_id_; }

 private:
  uint64_t pages_for(uint64_t bytes) const { return (bytes + opts_.page_size - 1) / opts_.page_size; }
  uint64_t memtable_image_bytes() const;
  bool write_run(SstImage image, uint32_t tier, size_t position, sim::IoCost* background);
  void maybe_compact(sim::IoCost* background);
  void note_key(const std::string& key);

  DeviceOptions opts_;
  MediaStore& media_;
  PageAllocator& alloc_;
  PageSource& internal_;
  uint64_t capacity_pages_;

  MemMap mem_;
  uint64_t mem_bytes_ = 0;   // memtable charge
  uint64_t mem_image_ = 0;   // encoded record bytes
  std::vector<Run> runs_;    // newest first
  std::optional<std::string> min_key_;
  std::optional<std::string> max_key_;
  uint64_t next_run_id_ = 1;
  uint64_t mutations_ = 0;
  uint64_t flushes_ = 0;
  uint64_t compactions_ = 0;
};

}  // namespace kvaccel::device
