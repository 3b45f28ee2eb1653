#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "kvaccel/sim/simulator.h"

namespace kvaccel::device {

// A run of logical pages [start, start + count).
struct Extent {
  uint64_t start = 0;
  uint64_t count = 0;

  uint64_t end() const { return start + count; }
  bool operator==(const Extent&) const = default;
};

uint64_t total_pages(std::span<const Extent> extents);
// Logical page of the i-th page of an extent list.
uint64_t page_at(std::span<const Extent> extents, uint64_t index);

// First-fit free-page allocator over a contiguous page range. Allocations
// prefer one extent and fall back to gathering several low-address extents.
class PageAllocator {
 public:
  PageAllocator(uint64_t first, uint64_t count);

  // Empty optional if fewer than n pages are free.
  std::optional<std::vector<Extent>> allocate(uint64_t n);
  void release(std::span<const Extent> extents);
  void reset();

  uint64_t first() const { return first_; }
  uint64_t capacity() const { return count_; }
  uint64_t free_pages() const { return free_total_; }
  uint64_t used_pages() const { return count_ - free_total_; }
  bool is_free(uint64_t page) const;

  // Free extents in address order, for image dumps.
  std::vector<Extent> free_extents() const;
  void restore(std::span<const Extent> free_list);

 private:
  uint64_t first_;
  uint64_t count_;
  uint64_t free_total_;
  std::map<uint64_t, uint64_t> free_;  // start -> count
};

// Page-granular reads out of some storage, charging the given cost.
class PageSource {
 public:
  virtual ~PageSource() = default;
  virtual uint32_t page_size() const = 0;
  // Copies pages [lba, lba + n) into out (n * page_size bytes).
  virtual void read_pages(uint64_t lba, uint64_t n, uint8_t* out, sim::IoCost* cost) = 0;
};

// Reads the byte range [offset, offset + len) of an image laid out over
// `extents`, touching only the covering pages.
std::vector<uint8_t> read_image_range(PageSource& src, std::span<const Extent> extents,
                                      uint64_t offset, uint64_t len, sim::IoCost* cost);

}  // namespace kvaccel::device
