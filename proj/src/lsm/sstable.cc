#include "kvaccel/lsm/sstable.h"

#include <algorithm>
#include <stdexcept>

namespace kvaccel {

using record::FormatError;

void SstBuilder::check_order(std::string_view key) const {
  if (!index_.empty() && !(index_.back().key < key)) {
    throw std::logic_error("SST keys must be strictly ascending");
  }
}

void SstBuilder::add(const Entry& e) {
  check_order(e.key);
  size_t before = body_.size();
  record::append(body_, e);
  index_.push_back({e.key, e.seq, e.tombstone, static_cast<uint32_t>(kSstHeaderBytes + before),
                    static_cast<uint32_t>(body_.size() - before)});
}

void SstBuilder::add_raw(std::string_view key, uint64_t seq, bool tombstone,
                         std::span<const uint8_t> rec) {
  check_order(key);
  size_t before = body_.size();
  body_.insert(body_.end(), rec.begin(), rec.end());
  index_.push_back({std::string(key), seq, tombstone,
                    static_cast<uint32_t>(kSstHeaderBytes + before),
                    static_cast<uint32_t>(rec.size())});
}

uint64_t SstBuilder::estimated_size() const {
  uint64_t footer = 0;
  if (!index_.empty()) footer = 2 + index_.front().key.size() + 2 + index_.back().key.size() + 4;
  return kSstHeaderBytes + body_.size() + footer;
}

SstImage SstBuilder::finish() {
  if (index_.empty()) throw std::logic_error("empty SST");
  SstImage img;
  img.bytes.reserve(estimated_size());
  record::put_u32(img.bytes, kSstMagic);
  record::put_u64(img.bytes, index_.size());
  img.bytes.insert(img.bytes.end(), body_.begin(), body_.end());
  const std::string& lo = index_.front().key;
  const std::string& hi = index_.back().key;
  record::put_u16(img.bytes, static_cast<uint16_t>(lo.size()));
  img.bytes.insert(img.bytes.end(), lo.begin(), lo.end());
  record::put_u16(img.bytes, static_cast<uint16_t>(hi.size()));
  img.bytes.insert(img.bytes.end(), hi.begin(), hi.end());
  record::put_u32(img.bytes, kSstMagic);
  img.index = std::move(index_);
  body_.clear();
  index_.clear();
  return img;
}

std::vector<Entry> parse_sst_image(std::span<const uint8_t> image) {
  if (image.size() < kSstHeaderBytes) throw FormatError("SST image too short");
  if (record::get_u32(image.data()) != kSstMagic) throw FormatError("bad SST magic");
  uint64_t count = record::get_u64(image.data() + 4);
  size_t pos = kSstHeaderBytes;
  std::vector<Entry> out;
  out.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    auto v = record::parse(image.subspan(pos));
    if (v.continuation()) throw FormatError("continuation flag inside SST");
    if (!out.empty() && !(out.back().key < v.key)) throw FormatError("SST keys out of order");
    out.push_back(v.to_entry());
    pos += v.size;
  }
  auto read_key = [&](std::string& k) {
    if (image.size() < pos + 2) throw FormatError("truncated SST footer");
    size_t n = record::get_u16(image.data() + pos);
    pos += 2;
    if (image.size() < pos + n) throw FormatError("truncated SST footer key");
    k.assign(reinterpret_cast<const char*>(image.data() + pos), n);
    pos += n;
  };
  std::string lo, hi;
  read_key(lo);
  read_key(hi);
  if (image.size() < pos + 4 || record::get_u32(image.data() + pos) != kSstMagic) {
    throw FormatError("bad SST footer magic");
  }
  if (!out.empty() && (lo != out.front().key || hi != out.back().key)) {
    throw FormatError("SST footer range mismatch");
  }
  return out;
}

SsTable::SsTable(uint64_t id, int level, SstImage image, std::vector<device::Extent> extents)
    : id_(id),
      level_(level),
      byte_size_(image.bytes.size()),
      extents_(std::move(extents)),
      index_(std::move(image.index)) {
  if (index_.empty()) throw std::logic_error("empty SST");
}

std::optional<size_t> SsTable::find(std::string_view key) const {
  size_t pos = lower_bound(key);
  if (pos < index_.size() && index_[pos].key == key) return pos;
  return std::nullopt;
}

size_t SsTable::lower_bound(std::string_view key) const {
  auto it = std::lower_bound(index_.begin(), index_.end(), key,
                             [](const IndexEntry& e, std::string_view k) { return e.key < k; });
  return static_cast<size_t>(it - index_.begin());
}

Entry SsTable::read_entry(device::PageSource& src, size_t pos, sim::IoCost* cost) const {
  const IndexEntry& ie = index_.at(pos);
  auto bytes = device::read_image_range(src, extents_, ie.offset, ie.length, cost);
  return record::parse(bytes).to_entry();
}

std::vector<uint8_t> SsTable::load_image(device::PageSource& src, sim::IoCost* cost) const {
  return device::read_image_range(src, extents_, 0, byte_size_, cost);
}

}  // namespace kvaccel
