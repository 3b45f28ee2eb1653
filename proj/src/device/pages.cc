#include "kvaccel/device/pages.h"

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace kvaccel::device {

uint64_t total_pages(std::span<const Extent> extents) {
  uint64_t n = 0;
  for (const auto& e : extents) n += e.count;
  return n;
}

uint64_t page_at(std::span<const Extent> extents, uint64_t index) {
  for (const auto& e : extents) {
    if (index < e.count) return e.start + index;
    index -= e.count;
  }
  throw std::out_of_range("page index beyond extent list");
}

PageAllocator::PageAllocator(uint64_t first, uint64_t count)
    : first_(first), count_(count), free_total_(count) {
  if (count > 0) free_.emplace(first, count);
}

void PageAllocator::reset() {
  free_.clear();
  if (count_ > 0) free_.emplace(first_, count_);
  free_total_ = count_;
}

std::optional<std::vector<Extent>> PageAllocator::allocate(uint64_t n) {
  if (n == 0) return std::vector<Extent>{};
  if (n > free_total_) return std::nullopt;
  for (auto it = free_.begin(); it != free_.end(); ++it) {
    if (it->second >= n) {
      Extent e{it->first, n};
      uint64_t rest = it->second - n;
      uint64_t next_start = it->first + n;
      free_.erase(it);
      if (rest > 0) free_.emplace(next_start, rest);
      free_total_ -= n;
      return std::vector<Extent>{e};
    }
  }
  std::vector<Extent> out;
  uint64_t need = n;
  while (need > 0) {
    auto it = free_.begin();
    uint64_t take = std::min(need, it->second);
    out.push_back({it->first, take});
    uint64_t rest = it->second - take;
    uint64_t next_start = it->first + take;
    free_.erase(it);
    if (rest > 0) free_.emplace(next_start, rest);
    need -= take;
  }
  free_total_ -= n;
  return out;
}

void PageAllocator::release(std::span<const Extent> extents) {
  for (const auto& e : extents) {
    if (e.count == 0) continue;
    if (e.start < first_ || e.end() > first_ + count_) {
      throw std::out_of_range("release outside allocator range");
    }
    auto [it, inserted] = free_.emplace(e.start, e.count);
    if (!inserted) throw std::logic_error("double free of page extent");
    // Coalesce with successor, then predecessor.
    auto next = std::next(it);
    if (next != free_.end()) {
      if (it->first + it->second > next->first) throw std::logic_error("overlapping free");
      if (it->first + it->second == next->first) {
        it->second += next->second;
        free_.erase(next);
      }
    }
    if (it != free_.begin()) {
      auto prev = std::prev(it);
      if (prev->first + prev->second > it->first) throw std::logic_error("overlapping free");
      if (prev->first + prev->second == it->first) {
        prev->second += it->second;
        free_.erase(it);
      }
    }
    free_total_ += e.count;
  }
}

bool PageAllocator::is_free(uint64_t page) const {
  auto it = free_.upper_bound(page);
  if (it == free_.begin()) return false;
  --it;
  return page < it->first + it->second;
}

std::vector<Extent> PageAllocator::free_extents() const {
  std::vector<Extent> out;
  out.reserve(free_.size());
  for (const auto& [start, count] : free_) out.push_back({start, count});
  return out;
}

void PageAllocator::restore(std::span<const Extent> free_list) {
  free_.clear();
  free_total_ = 0;
  for (const auto& e : free_list) {
    if (e.start < first_ || e.end() > first_ + count_) {
      throw std::out_of_range("restored extent outside allocator range");
    }
    free_.emplace(e.start, e.count);
    free_total_ += e.count;
  }
}

std::vector<uint8_t> read_image_range(PageSource& src, std::span<const Extent> extents,
                                      uint64_t offset, uint64_t len, sim::IoCost* cost) {
  std::vector<uint8_t> out(len);
  if (len == 0) return out;
  const uint64_t ps = src.page_size();
  uint64_t first = offset / ps;
  uint64_t last = (offset + len - 1) / ps;
  std::vector<uint8_t> buf;
  uint64_t p = first;
  while (p <= last) {
    // Coalesce consecutive logical pages into one read.
    uint64_t lba = page_at(extents, p);
    uint64_t run = 1;
    while (p + run <= last && page_at(extents, p + run) == lba + run) ++run;
    buf.resize(run * ps);
    src.read_pages(lba, run, buf.data(), cost);
    uint64_t run_begin = p * ps;
    uint64_t copy_from = std::max(offset, run_begin);
    uint64_t copy_to = std::min(offset + len, run_begin + run * ps);
    std::memcpy(out.data() + (copy_from - offset), buf.data() + (copy_from - run_begin),
                copy_to - copy_from);
    p += run;
  }
  return out;
}

}  // namespace kvaccel::device
