#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kvaccel/accel/accel_store.h"
#include "kvaccel/lsm/iterator.h"

namespace kvaccel {

// Merged range cursor over the host LSM and the device LSM. For a key present
// on both sides the device copy wins only if the metadata table names it.
// Tombstones are consumed, never returned.
//
// The store must not be written while the cursor is live; any call after a
// mutation throws std::logic_error.
class DualIterator {
 public:
  // Costs accumulate into `cost`; with nullptr they are executed on the
  // simulator when the iterator is destroyed.
  DualIterator(AccelStore& store, sim::IoCost* cost = nullptr);
  ~DualIterator();
  DualIterator(const DualIterator&) = delete;
  DualIterator& operator=(const DualIterator&) = delete;

  void seek(std::string_view target);
  void next();
  bool valid() const { return current_.has_value(); }
  const std::string& key() const { return current_->key; }
  const std::string& value() const { return current_->value; }
  Route source() const { return current_side_; }

  // Seek plus up to n Next calls; at most n + 1 pairs.
  std::vector<KeyValue> range(std::string_view start, size_t n);

  // Number of times the emitting side changed.
  uint64_t switches() const { return switches_; }
  uint64_t emitted() const { return emitted_; }

 private:
  void check_unchanged() const;
  void settle();
  void advance_main();
  void advance_dev();

  AccelStore& store_;
  sim::IoCost own_cost_;
  sim::IoCost* cost_;
  uint64_t mutations_at_open_;

  std::unique_ptr<EntryIterator> main_;
  bool dev_active_ = false;
  uint64_t dev_handle_ = 0;
  std::optional<Entry> dev_cur_;

  std::optional<KeyValue> current_;
  Route current_side_ = Route::kMain;
  std::optional<Route> last_side_;
  bool consume_main_ = false;
  bool consume_dev_ = false;
  uint64_t switches_ = 0;
  uint64_t emitted_ = 0;
};

}  // namespace kvaccel
