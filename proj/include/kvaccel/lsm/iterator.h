#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "kvaccel/lsm/entry.h"
#include "kvaccel/lsm/sstable.h"

namespace kvaccel {

// Ascending cursor over versioned entries. Tombstones are surfaced so that
// callers merging several sources can apply shadowing themselves. value()
// may read from the device and charge the cost passed at construction.
class EntryIterator {
 public:
  virtual ~EntryIterator() = default;
  virtual bool valid() const = 0;
  virtual void seek(std::string_view target) = 0;  // first key >= target
  virtual void next() = 0;
  virtual const std::string& key() const = 0;
  virtual uint64_t seq() const = 0;
  virtual bool tombstone() const = 0;
  virtual std::string value() = 0;

  Entry entry() {
    std::string v = tombstone() ? std::string() : value();
    return Entry{key(), std::move(v), seq(), tombstone()};
  }
};

using MemMap = std::map<std::string, Entry, std::less<>>;

// Over a live in-memory map; the map must not change while iterating.
std::unique_ptr<EntryIterator> new_map_iterator(const MemMap& map);

std::unique_ptr<EntryIterator> new_sst_iterator(SstPtr sst, device::PageSource& src,
                                                sim::IoCost* cost);

// Concatenation of key-disjoint SSTs sorted by key.
std::unique_ptr<EntryIterator> new_level_iterator(std::vector<SstPtr> files,
                                                  device::PageSource& src, sim::IoCost* cost);

// Merges children ordered newest-first. For equal keys the highest seq wins
// and the other versions are skipped.
std::unique_ptr<EntryIterator> new_merging_iterator(
    std::vector<std::unique_ptr<EntryIterator>> children);

}  // namespace kvaccel
