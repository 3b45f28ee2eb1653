#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kvaccel/device/pages.h"
#include "kvaccel/lsm/entry.h"
#include "kvaccel/lsm/record_format.h"

namespace kvaccel {

// SST image layout (little-endian):
//
//   header   magic u32 = kSstMagic, entry_count u64
//   records  entry_count records in strictly ascending key order, see
//            record_format.h (flags carries only the tombstone bit)
//   footer   min_key_len u16, min_key, max_key_len u16, max_key,
//            magic u32 = kSstMagic
//
// The image is stored page-aligned over a list of extents; the tail of the
// last page is zero.
inline constexpr uint32_t kSstMagic = 0x5453564B;  // "KVST"
inline constexpr size_t kSstHeaderBytes = 4 + 8;

struct IndexEntry {
  std::string key;
  uint64_t seq;
  bool tombstone;
  uint32_t offset;  // byte offset of the record within the image
  uint32_t length;
};

struct SstImage {
  std::vector<uint8_t> bytes;
  std::vector<IndexEntry> index;
};

class SstBuilder {
 public:
  // Keys must arrive strictly ascending.
  void add(const Entry& e);
  // Adds an already-encoded record.
  void add_raw(std::string_view key, uint64_t seq, bool tombstone, std::span<const uint8_t> rec);
  SstImage finish();

  size_t entries() const { return index_.size(); }
  // Image size if finished now.
  uint64_t estimated_size() const;
  bool empty() const { return index_.empty(); }

 private:
  void check_order(std::string_view key) const;

  std::vector<uint8_t> body_;
  std::vector<IndexEntry> index_;
};

// Decodes and validates a full image. Throws record::FormatError.
std::vector<Entry> parse_sst_image(std::span<const uint8_t> image);

// Sorted, immutable run of entries stored on device pages, with its
// in-memory key index.
class SsTable {
 public:
  SsTable(uint64_t id, int level, SstImage image, std::vector<device::Extent> extents);

  uint64_t id() const { return id_; }
  int level() const { return level_; }
  void set_level(int level) { level_ = level; }
  const std::string& min_key() const { return index_.front().key; }
  const std::string& max_key() const { return index_.back().key; }
  uint64_t entry_count() const { return index_.size(); }
  uint64_t byte_size() const { return byte_size_; }
  const std::vector<device::Extent>& extents() const { return extents_; }
  const std::vector<IndexEntry>& index() const { return index_; }

  bool overlaps(std::string_view lo, std::string_view hi) const {
    return !(max_key() < lo || hi < min_key());
  }
  bool may_contain(std::string_view key) const { return !(key < min_key() || max_key() < key); }

  // Position of `key`, if present.
  std::optional<size_t> find(std::string_view key) const;
  // First position with key >= `key` (== entry_count() if none).
  size_t lower_bound(std::string_view key) const;

  Entry read_entry(device::PageSource& src, size_t pos, sim::IoCost* cost) const;
  std::vector<uint8_t> load_image(device::PageSource& src, sim::IoCost* cost) const;

  bool being_compacted = false;

 private:
  uint64_t id_;
  int level_;
  uint64_t byte_size_;
  std::vector<device::Extent> extents_;
  std::vector<IndexEntry> index_;
};

using SstPtr = std::shared_ptr<SsTable>;

}  // namespace kvaccel
