#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "kvaccel/device/pages.h"

namespace kvaccel::device {

// Logical page space of the device: block region [0, dp), kv region
// [dp, total_pages).
struct AddressSpace {
  uint64_t total_pages;
  uint32_t page_size;
  uint64_t dp;

  uint64_t block_pages() const { return dp; }
  uint64_t kv_pages() const { return total_pages - dp; }
  uint64_t block_capacity_bytes() const { return dp * page_size; }
  bool in_block_region(uint64_t lba, uint64_t n) const { return lba + n <= dp; }
  bool in_kv_region(uint64_t lba, uint64_t n) const {
    return lba >= dp && lba + n <= total_pages;
  }
};

// Sparse page store backing the whole logical space. Never-written pages
// read as zeros.
class MediaStore {
 public:
  MediaStore(uint64_t total_pages, uint32_t page_size);

  uint32_t page_size() const { return page_size_; }
  uint64_t total_pages() const { return pages_.size(); }

  void write(uint64_t lba, std::span<const uint8_t> data);  // data is page-aligned length
  void read(uint64_t lba, uint64_t n, uint8_t* out) const;
  void discard(std::span<const Extent> extents);
  void discard_range(uint64_t first, uint64_t count);
  bool written(uint64_t lba) const { return pages_[lba] != nullptr; }
  uint64_t resident_pages() const { return resident_; }

 private:
  uint32_t page_size_;
  std::vector<std::unique_ptr<uint8_t[]>> pages_;
  uint64_t resident_ = 0;
};

// Writes `image` over `extents`, zero-padding the final page.
void write_image(MediaStore& media, std::span<const Extent> extents, std::span<const uint8_t> image);

}  // namespace kvaccel::device
