#include "kvaccel/lsm/iterator.h"

#include <algorithm>
#include <cstring>

namespace kvaccel {
namespace {

class MapIterator final : public EntryIterator {
 public:
  explicit MapIterator(const MemMap& map) : map_(map), it_(map.end()) {}

  bool valid() const override { return it_ != map_.end(); }
  void seek(std::string_view target) override { it_ = map_.lower_bound(target); }
  void next() override { ++it_; }
  const std::string& key() const override { return it_->first; }
  uint64_t seq() const override { return it_->second.seq; }
  bool tombstone() const override { return it_->second.tombstone; }
  std::string value() override { return it_->second.value; }

 private:
  const MemMap& map_;
  MemMap::const_iterator it_;
};

// Reads records through a sliding window of cached pages, so a sequential
// scan charges each page once.
class SstIterator final : public EntryIterator {
 public:
  SstIterator(SstPtr sst, device::PageSource& src, sim::IoCost* cost)
      : sst_(std::move(sst)), src_(src), cost_(cost), pos_(sst_->entry_count()) {}

  bool valid() const override { return pos_ < sst_->entry_count(); }
  void seek(std::string_view target) override { pos_ = sst_->lower_bound(target); }
  void next() override { ++pos_; }
  const std::string& key() const override { return sst_->index()[pos_].key; }
  uint64_t seq() const override { return sst_->index()[pos_].seq; }
  bool tombstone() const override { return sst_->index()[pos_].tombstone; }

  std::string value() override {
    const IndexEntry& ie = sst_->index()[pos_];
    const uint64_t ps = src_.page_size();
    uint64_t first = ie.offset / ps;
    uint64_t last = (ie.offset + ie.length - 1) / ps;
    if (window_pages_ == 0 || first < window_first_ || first >= window_first_ + window_pages_) {
      window_first_ = first;
      window_pages_ = 0;
      window_.clear();
    } else if (first > window_first_) {
      uint64_t drop = first - window_first_;
      window_.erase(window_.begin(), window_.begin() + static_cast<ptrdiff_t>(drop * ps));
      window_first_ = first;
      window_pages_ -= drop;
    }
    for (uint64_t p = window_first_ + window_pages_; p <= last; ++p) {
      size_t at = window_.size();
      window_.resize(at + ps);
      src_.read_pages(device::page_at(sst_->extents(), p), 1, window_.data() + at, cost_);
      ++window_pages_;
    }
    uint64_t off = ie.offset - window_first_ * ps;
    auto view = record::parse(std::span<const uint8_t>(window_.data() + off, ie.length));
    return std::string(view.value);
  }

 private:
  SstPtr sst_;
  device::PageSource& src_;
  sim::IoCost* cost_;
  size_t pos_;
  std::vector<uint8_t> window_;
  uint64_t window_first_ = 0;
  uint64_t window_pages_ = 0;
};

class LevelIterator final : public EntryIterator {
 public:
  LevelIterator(std::vector<SstPtr> files, device::PageSource& src, sim::IoCost* cost)
      : files_(std::move(files)), src_(src), cost_(cost), file_(files_.size()) {}

  bool valid() const override { return cur_ && cur_->valid(); }

  void seek(std::string_view target) override {
    auto it = std::lower_bound(files_.begin(), files_.end(), target,
                               [](const SstPtr& f, std::string_view k) { return f->max_key() < k; });
    open(static_cast<size_t>(it - files_.begin()));
    if (cur_) cur_->seek(target);
    skip_exhausted();
  }

  void next() override {
    cur_->next();
    skip_exhausted();
  }

  const std::string& key() const override { return cur_->key(); }
  uint64_t seq() const override { return cur_->seq(); }
  bool tombstone() const override { return cur_->tombstone(); }
  std::string value() override { return cur_->value(); }

 private:
  void open(size_t i) {
    file_ = i;
    cur_.reset();
    if (i < files_.size()) cur_ = new_sst_iterator(files_[i], src_, cost_);
  }

  void skip_exhausted() {
    while (cur_ && !cur_->valid()) {
      open(file_ + 1);
      if (cur_) cur_->seek("");
    }
  }

  std::vector<SstPtr> files_;
  device::PageSource& src_;
  sim::IoCost* cost_;
  size_t file_;
  std::unique_ptr<EntryIterator> cur_;
};

class MergingIterator final : public EntryIterator {
 public:
  explicit MergingIterator(std::vector<std::unique_ptr<EntryIterator>> children)
      : children_(std::move(children)) {}

  bool valid() const override { return winner_ != nullptr; }

  void seek(std::string_view target) override {
    for (auto& c : children_) c->seek(target);
    pick();
  }

  void next() override {
    std::string current = winner_->key();
    for (auto& c : children_) {
      if (c->valid() && c->key() == current) c->next();
    }
    pick();
  }

  const std::string& key() const override { return winner_->key(); }
  uint64_t seq() const override { return winner_->seq(); }
  bool tombstone() const override { return winner_->tombstone(); }
  std::string value() override { return winner_->value(); }

 private:
  void pick() {
    winner_ = nullptr;
    for (auto& c : children_) {
      if (!c->valid()) continue;
      if (winner_ == nullptr || c->key() < winner_->key() ||
          (c->key() == winner_->key() && c->seq() > winner_->seq())) {
        winner_ = c.get();
      }
    }
  }

  std::vector<std::unique_ptr<EntryIterator>> children_;
  EntryIterator* winner_ = nullptr;
};

}  // namespace

std::unique_ptr<EntryIterator> new_map_iterator(const MemMap& map) {
  return std::make_unique<MapIterator>(map);
}

std::unique_ptr<EntryIterator> new_sst_iterator(SstPtr sst, device::PageSource& src,
                                                sim::IoCost* cost) {
  return std::make_unique<SstIterator>(std::move(sst), src, cost);
}

std::unique_ptr<EntryIterator> new_level_iterator(std::vector<SstPtr> files,
                                                  device::PageSource& src, sim::IoCost* cost) {
  return std::make_unique<LevelIterator>(std::move(files), src, cost);
}

std::unique_ptr<EntryIterator> new_merging_iterator(
    std::vector<std::unique_ptr<EntryIterator>> children) {
  return std::make_unique<MergingIterator>(std::move(children));
}

}  // namespace kvaccel
