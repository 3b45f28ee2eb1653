#include "kvaccel/device/media.h"

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace kvaccel::device {

MediaStore::MediaStore(uint64_t total_pages, uint32_t page_size)
    : page_size_(page_size), pages_(total_pages) {}

void MediaStore::write(uint64_t lba, std::span<const uint8_t> data) {
  if (data.size() % page_size_ != 0) throw std::invalid_argument("unaligned media write");
  uint64_t n = data.size() / page_size_;
  if (lba + n > pages_.size()) throw std::out_of_range("media write beyond device");
  for (uint64_t i = 0; i < n; ++i) {
    auto& p = pages_[lba + i];
    if (!p) {
      p = std::make_unique<uint8_t[]>(page_size_);
      ++resident_;
    }
    std::memcpy(p.get(), data.data() + i * page_size_, page_size_);
  }
}

void MediaStore::read(uint64_t lba, uint64_t n, uint8_t* out) const {
  if (lba + n > pages_.size()) throw std::out_of_range("media read beyond device");
  for (uint64_t i = 0; i < n; ++i) {
    const auto& p = pages_[lba + i];
    if (p) {
      std::memcpy(out + i * page_size_, p.get(), page_size_);
    } else {
      std::memset(out + i * page_size_, 0, page_size_);
    }
  }
}

void MediaStore::discard_range(uint64_t first, uint64_t count) {
  for (uint64_t i = first; i < first + count && i < pages_.size(); ++i) {
    if (pages_[i]) {
      pages_[i].reset();
      --resident_;
    }
  }
}

void MediaStore::discard(std::span<const Extent> extents) {
  for (const auto& e : extents) discard_range(e.start, e.count);
}

void write_image(MediaStore& media, std::span<const Extent> extents, std::span<const uint8_t> image) {
  const uint64_t ps = media.page_size();
  uint64_t off = 0;
  std::vector<uint8_t> buf;
  for (const auto& e : extents) {
    uint64_t len = e.count * ps;
    buf.assign(len, 0);
    if (off < image.size()) {
      uint64_t n = std::min<uint64_t>(len, image.size() - off);
      std::memcpy(buf.data(), image.data() + off, n);
    }
    media.write(e.start, buf);
    off += len;
  }
}

}  // namespace kvaccel::device
