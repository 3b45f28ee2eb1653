#include "kvaccel/device/dev_lsm.h"

#include <stdexcept>

#include "kvaccel/lsm/record_format.h"

namespace kvaccel::device {

DevLsm::DevLsm(const DeviceOptions& opts, MediaStore& media, PageAllocator& alloc,
               PageSource& internal)
    : opts_(opts), media_(media), alloc_(alloc), internal_(internal) {
  capacity_pages_ = alloc_.capacity();
  if (opts_.dev_capacity_bytes > 0) {
    capacity_pages_ = std::min(capacity_pages_, pages_for(opts_.dev_capacity_bytes));
  }
}

uint64_t DevLsm::memtable_image_bytes() const {
  if (mem_.empty()) return 0;
  const auto& lo = mem_.begin()->first;
  const auto& hi = mem_.rbegin()->first;
  return kSstHeaderBytes + mem_image_ + 2 + lo.size() + 2 + hi.size() + 4;
}

void DevLsm::note_key(const std::string& key) {
  if (!min_key_ || key < *min_key_) min_key_ = key;
  if (!max_key_ || *max_key_ < key) max_key_ = key;
}

bool DevLsm::put(const Entry& e, sim::IoCost* background) {
  if (e.key.empty()) throw std::invalid_argument("empty key");
  // Worst case: the record grows the image by itself plus footer keys.
  uint64_t projected = memtable_image_bytes() + record::encoded_size(e) + 4 + 2 * e.key.size() + kSstHeaderBytes;
  if (alloc_.used_pages() + pages_for(projected) > capacity_pages_) return false;

  auto it = mem_.find(e.key);
  if (it != mem_.end()) {
    mem_bytes_ -= memtable_charge(it->second, 0);
    mem_image_ -= record::encoded_size(it->second);
    it->second = e;
  } else {
    mem_.emplace(e.key, e);
  }
  mem_bytes_ += memtable_charge(e, 0);
  mem_image_ += record::encoded_size(e);
  note_key(e.key);
  ++mutations_;
  if (opts_.dev_flush && mem_bytes_ >= opts_.dev_memtable_bytes) flush(background);
  return true;
}

void DevLsm::flush(sim::IoCost* background) {
  if (mem_.empty() || !opts_.dev_flush) return;
  SstBuilder b;
  for (const auto& [k, e] : mem_) b.add(e);
  if (!write_run(b.finish(), 0, 0, background)) return;  // stays buffered
  mem_.clear();
  mem_bytes_ = 0;
  mem_image_ = 0;
  ++flushes_;
  ++mutations_;
  if (opts_.dev_compaction) maybe_compact(background);
}

bool DevLsm::write_run(SstImage image, uint32_t tier, size_t position, sim::IoCost* background) {
  uint64_t pages = pages_for(image.bytes.size());
  auto extents = alloc_.allocate(pages);
  if (!extents) return false;
  write_image(media_, *extents, image.bytes);
  if (background) background->add(sim::Channel::kInternal, pages * opts_.page_size);
  auto table = std::make_shared<SsTable>(next_run_id_++, static_cast<int>(tier), std::move(image),
                                         std::move(*extents));
  runs_.insert(runs_.begin() + static_cast<ptrdiff_t>(position), Run{std::move(table), tier});
  return true;
}

void DevLsm::maybe_compact(sim::IoCost* background) {
  const uint32_t fanout = std::max<uint32_t>(opts_.dev_tier_fanout, 2);
  for (;;) {
    // Tiers ascend from the front of the list, so each tier is contiguous.
    size_t first = 0;
    size_t last = 0;
    bool found = false;
    while (first < runs_.size() && !found) {
      last = first;
      while (last + 1 < runs_.size() && runs_[last + 1].tier == runs_[first].tier) ++last;
      if (last - first + 1 >= fanout) {
        found = true;
      } else {
        first = last + 1;
      }
    }
    if (!found) return;

    uint32_t tier = runs_[first].tier;
    std::vector<std::unique_ptr<EntryIterator>> children;
    for (size_t i = first; i <= last; ++i) {
      children.push_back(new_sst_iterator(runs_[i].table, internal_, background));
    }
    auto merged = new_merging_iterator(std::move(children));
    SstBuilder b;
    for (merged->seek(""); merged->valid(); merged->next()) b.add(merged->entry());
    merged.reset();

    std::vector<Run> inputs(runs_.begin() + static_cast<ptrdiff_t>(first),
                            runs_.begin() + static_cast<ptrdiff_t>(last + 1));
    runs_.erase(runs_.begin() + static_cast<ptrdiff_t>(first),
                runs_.begin() + static_cast<ptrdiff_t>(last + 1));
    if (!write_run(b.finish(), tier + 1, first, background)) {
      runs_.insert(runs_.begin() + static_cast<ptrdiff_t>(first), inputs.begin(), inputs.end());
      return;
    }
    for (const auto& r : inputs) {
      alloc_.release(r.table->extents());
      media_.discard(r.table->extents());
    }
    ++compactions_;
    ++mutations_;
  }
}

std::optional<Entry> DevLsm::get(std::string_view key, sim::IoCost* cost) {
  auto it = mem_.find(key);
  if (it != mem_.end()) return it->second;
  for (const auto& run : runs_) {
    if (cost) ++cost->sst_probes;
    if (auto pos = run.table->find(key)) return run.table->read_entry(internal_, *pos, cost);
    if (cost) cost->add(sim::Channel::kInternal, opts_.page_size);
  }
  return std::nullopt;
}

std::unique_ptr<EntryIterator> DevLsm::new_iterator(sim::IoCost* cost) {
  std::vector<std::unique_ptr<EntryIterator>> children;
  children.push_back(new_map_iterator(mem_));
  for (const auto& run : runs_) children.push_back(new_sst_iterator(run.table, internal_, cost));
  return new_merging_iterator(std::move(children));
}

void DevLsm::reset() {
  for (const auto& r : runs_) media_.discard(r.table->extents());
  runs_.clear();
  alloc_.reset();
  mem_.clear();
  mem_bytes_ = 0;
  mem_image_ = 0;
  min_key_.reset();
  max_key_.reset();
  ++mutations_;
}

void DevLsm::restore(std::vector<Entry> memtable,
                     std::vector<std::pair<uint32_t, std::vector<Extent>>> runs,
                     uint64_t next_run_id, std::optional<std::string> min_key,
                     std::optional<std::string> max_key) {
  mem_.clear();
  mem_bytes_ = 0;
  mem_image_ = 0;
  for (auto& e : memtable) {
    mem_bytes_ += memtable_charge(e, 0);
    mem_image_ += record::encoded_size(e);
    std::string k = e.key;
    mem_.emplace(std::move(k), std::move(e));
  }
  runs_.clear();
  const uint64_t ps = opts_.page_size;
  for (auto& [tier, extents] : runs) {
    std::vector<uint8_t> raw(total_pages(extents) * ps);
    uint64_t off = 0;
    for (const auto& x : extents) {
      media_.read(x.start, x.count, raw.data() + off);
      off += x.count * ps;
    }
    // Trailing zero padding is ignored by the parser; rebuild the index.
    SstBuilder b;
    for (const auto& e : parse_sst_image(raw)) b.add(e);
    auto table = std::make_shared<SsTable>(next_run_id_++, static_cast<int>(tier), b.finish(),
                                           std::move(extents));
    runs_.push_back(Run{std::move(table), tier});
  }
  next_run_id_ = std::max(next_run_id_, next_run_id);
  min_key_ = std::move(min_key);
  max_key_ = std::move(max_key);
  ++mutations_;
}

}  // namespace kvaccel::device
