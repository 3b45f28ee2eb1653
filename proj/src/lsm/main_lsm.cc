#include "kvaccel/lsm/main_lsm.h"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace kvaccel {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kNormal: return "normal";
    case Verdict::kSlowdown: return "slowdown";
    case Verdict::kStall: return "stall";
  }
  return "?";
}

std::string_view to_string(StallReason r) {
  switch (r) {
    case StallReason::kNone: return "none";
    case StallReason::kFlushBacklog: return "flush-backlog";
    case StallReason::kL0Stop: return "l0-stop";
    case StallReason::kPendingBytes: return "pending-bytes";
  }
  return "?";
}

namespace {

// Keeps a memtable alive for as long as an iterator walks it.
class PinnedMapIterator final : public EntryIterator {
 public:
  explicit PinnedMapIterator(MemPtr mem) : mem_(std::move(mem)), it_(new_map_iterator(mem_->map)) {}
  bool valid() const override { return it_->valid(); }
  void seek(std::string_view t) override { it_->seek(t); }
  void next() override { it_->next(); }
  const std::string& key() const override { return it_->key(); }
  uint64_t seq() const override { return it_->seq(); }
  bool tombstone() const override { return it_->tombstone(); }
  std::string value() override { return it_->value(); }

 private:
  MemPtr mem_;
  std::unique_ptr<EntryIterator> it_;
};

}  // namespace

struct MainLsm::CompactionJob {
  size_t level = 0;
  std::vector<SstPtr> inputs;
  std::vector<SstPtr> next;
  std::vector<SstImage> outputs;
  std::vector<std::vector<device::Extent>> out_extents;
  uint64_t bytes_in = 0;
  uint64_t bytes_out = 0;
  uint32_t helpers = 0;  // idle workers lent to the CPU phase
};

MainLsm::MainLsm(const LsmOptions& opts, bool slowdown_enabled, sim::Simulator& sim,
                 device::HybridDevice& dev)
    : opts_(opts),
      slowdown_enabled_(slowdown_enabled),
      sim_(sim),
      dev_(dev),
      alloc_(0, dev.space().block_pages()),
      active_(std::make_shared<MemTable>()),
      levels_(std::max<uint32_t>(opts.num_levels, 2)),
      compact_pointer_(levels_.size()) {}

uint64_t MainLsm::level_bytes(size_t level) const {
  uint64_t sum = 0;
  for (const auto& f : levels_.at(level)) sum += f->byte_size();
  return sum;
}

uint64_t MainLsm::level_target(size_t level) const {
  if (level == 0) return 0;
  uint64_t t = opts_.level1_bytes;
  for (size_t i = 1; i < level; ++i) t *= opts_.level_ratio;
  return t;
}

uint64_t MainLsm::pending_compaction_bytes() const {
  uint64_t pending = 0;
  if (levels_[0].size() >= opts_.l0_compaction_trigger) pending += level_bytes(0);
  for (size_t i = 1; i + 1 < levels_.size(); ++i) {
    uint64_t b = level_bytes(i);
    uint64_t t = level_target(i);
    if (b > t) pending += b - t;
  }
  return pending;
}

StallStatus MainLsm::stall_status() const {
  StallStatus s;
  s.l0_count = static_cast<uint32_t>(levels_[0].size());
  s.imm_count = static_cast<uint32_t>(imms_.size());
  s.pending_compaction_bytes = pending_compaction_bytes();
  if (s.imm_count >= opts_.max_immutable) {
    s.reason = StallReason::kFlushBacklog;
  } else if (s.l0_count >= opts_.l0_stop) {
    s.reason = StallReason::kL0Stop;
  } else if (s.pending_compaction_bytes >= opts_.pending_hard_bytes) {
    s.reason = StallReason::kPendingBytes;
  }
  if (s.reason != StallReason::kNone) {
    s.verdict = Verdict::kStall;
  } else if (s.l0_count >= opts_.l0_slowdown ||
             s.pending_compaction_bytes >= opts_.pending_soft_bytes ||
             (opts_.max_immutable >= 3 && s.imm_count + 1 >= opts_.max_immutable)) {
    s.verdict = Verdict::kSlowdown;
  }
  return s;
}

PutOutcome MainLsm::put_local(const Entry& e) {
  if (e.key.empty()) throw std::invalid_argument("empty key");
  StallStatus s = stall_status();
  PutOutcome out;
  if (s.verdict == Verdict::kStall) {
    out.blocked = true;
    out.reason = s.reason;
    ++counters_.blocked[static_cast<size_t>(s.reason)];
    return out;
  }
  if (slowdown_enabled_ && s.verdict == Verdict::kSlowdown) {
    out.delay_us = opts_.slowdown_sleep_us;
    ++counters_.slowdown_delays;
  }
  uint64_t charge = memtable_charge(e, opts_.entry_overhead);
  auto it = active_->map.find(e.key);
  uint64_t replaced = it == active_->map.end() ? 0 : memtable_charge(it->second, opts_.entry_overhead);
  if (!active_->map.empty() && active_->bytes - replaced + charge > opts_.memtable_bytes) {
    rotate();
    replaced = 0;
  }
  active_->bytes = active_->bytes - replaced + charge;
  active_->map.insert_or_assign(e.key, e);
  ++counters_.puts;
  return out;
}

void MainLsm::rotate() {
  imms_.push_back(active_);
  active_ = std::make_shared<MemTable>();
  maybe_schedule_flush();
}

void MainLsm::force_flush() {
  if (!active_->map.empty()) rotate();
}

std::optional<Entry> MainLsm::get_version(std::string_view key, sim::IoCost* cost) {
  if (auto it = active_->map.find(key); it != active_->map.end()) return it->second;
  for (auto m = imms_.rbegin(); m != imms_.rend(); ++m) {
    if (auto it = (*m)->map.find(key); it != (*m)->map.end()) return it->second;
  }
  auto& src = dev_.block_source();
  auto probe = [&](const SstPtr& f) -> std::optional<Entry> {
    if (cost) ++cost->sst_probes;
    if (auto pos = f->find(key)) return f->read_entry(src, *pos, cost);
    if (cost) cost->add(sim::Channel::kBlockD2H, src.page_size());
    return std::nullopt;
  };
  for (const auto& f : levels_[0]) {
    if (!f->may_contain(key)) continue;
    if (auto e = probe(f)) return e;
  }
  for (size_t l = 1; l < levels_.size(); ++l) {
    const auto& files = levels_[l];
    auto it = std::lower_bound(files.begin(), files.end(), key,
                               [](const SstPtr& f, std::string_view k) { return f->max_key() < k; });
    if (it == files.end() || !(*it)->may_contain(key)) continue;
    if (auto e = probe(*it)) return e;
  }
  return std::nullopt;
}

std::optional<Entry> MainLsm::get_local(std::string_view key, sim::IoCost* cost) {
  auto e = get_version(key, cost);
  if (e && e->tombstone) return std::nullopt;
  return e;
}

std::unique_ptr<EntryIterator> MainLsm::new_iterator(sim::IoCost* cost) {
  std::vector<std::unique_ptr<EntryIterator>> children;
  children.push_back(std::make_unique<PinnedMapIterator>(active_));
  for (auto m = imms_.rbegin(); m != imms_.rend(); ++m) {
    children.push_back(std::make_unique<PinnedMapIterator>(*m));
  }
  auto& src = dev_.block_source();
  for (const auto& f : levels_[0]) children.push_back(new_sst_iterator(f, src, cost));
  for (size_t l = 1; l < levels_.size(); ++l) {
    if (!levels_[l].empty()) children.push_back(new_level_iterator(levels_[l], src, cost));
  }
  return new_merging_iterator(std::move(children));
}

std::vector<device::Extent> MainLsm::write_image(const std::vector<uint8_t>& image,
                                                 sim::IoCost* cost) {
  const uint64_t ps = dev_.space().page_size;
  uint64_t pages = (image.size() + ps - 1) / ps;
  auto extents = alloc_.allocate(pages);
  if (!extents) throw std::runtime_error("block region full");
  uint64_t off = 0;
  for (const auto& x : *extents) {
    uint64_t len = std::min<uint64_t>(x.count * ps, image.size() - off);
    auto st = dev_.block_write(x.start, x.count,
                               std::span<const uint8_t>(image.data() + off, len), cost);
    if (st != device::DeviceStatus::kOk) throw std::logic_error("block write rejected");
    off += len;
  }
  return std::move(*extents);
}

void MainLsm::release(const std::vector<device::Extent>& extents) { alloc_.release(extents); }

void MainLsm::notify() {
  auto ls = listeners_;
  for (auto& cb : ls) cb();
}

void MainLsm::maybe_schedule_flush() {
  if (flush_running_ || imms_.empty()) return;
  flush_running_ = true;
  MemPtr mem = imms_.front();
  SstBuilder b;
  for (const auto& [k, e] : mem->map) b.add(e);
  auto image = std::make_shared<SstImage>(b.finish());
  sim::IoCost cost;
  cost.host_cpu_us = sim_.compaction_cpu_us(image->bytes.size(), 0);
  auto extents = write_image(image->bytes, &cost);
  counters_.flush_bytes += device::total_pages(extents) * dev_.space().page_size;
  sim_.execute(
      cost,
      [this, mem, image, extents = std::move(extents)]() mutable {
        auto sst = std::make_shared<SsTable>(next_sst_id_++, 0, std::move(*image), std::move(extents));
        levels_[0].insert(levels_[0].begin(), std::move(sst));
        if (imms_.empty() || imms_.front() != mem) throw std::logic_error("flush order violated");
        imms_.pop_front();
        flush_running_ = false;
        ++counters_.flushes;
        maybe_schedule_flush();
        maybe_schedule_compaction();
        notify();
      },
      sim::CpuKind::kBackground);
}

bool MainLsm::is_bottom(size_t level) const {
  for (size_t l = level + 1; l < levels_.size(); ++l) {
    if (!levels_[l].empty()) return false;
  }
  return true;
}

std::unique_ptr<MainLsm::CompactionJob> MainLsm::pick_compaction() {
  auto overlapping = [&](size_t level, std::string_view lo, std::string_view hi,
                         std::vector<SstPtr>* out) {
    for (const auto& f : levels_[level]) {
      if (!f->overlaps(lo, hi)) continue;
      if (f->being_compacted) return false;
      out->push_back(f);
    }
    return true;
  };

  if (!l0_compaction_running_ && levels_[0].size() >= opts_.l0_compaction_trigger) {
    auto job = std::make_unique<CompactionJob>();
    job->level = 0;
    job->inputs = levels_[0];
    std::string lo = job->inputs.front()->min_key();
    std::string hi = job->inputs.front()->max_key();
    for (const auto& f : job->inputs) {
      lo = std::min(lo, f->min_key());
      hi = std::max(hi, f->max_key());
    }
    if (overlapping(1, lo, hi, &job->next)) {
      l0_compaction_running_ = true;
      return job;
    }
  }

  for (size_t l = 1; l + 1 < levels_.size(); ++l) {
    if (level_bytes(l) <= level_target(l)) continue;
    const auto& files = levels_[l];
    // Round-robin over the key space, starting after the last compacted key.
    size_t start = 0;
    while (start < files.size() && !(compact_pointer_[l] < files[start]->min_key())) ++start;
    for (size_t k = 0; k < files.size(); ++k) {
      const SstPtr& f = files[(start + k) % files.size()];
      if (f->being_compacted) continue;
      auto job = std::make_unique<CompactionJob>();
      job->level = l;
      job->inputs = {f};
      if (!overlapping(l + 1, f->min_key(), f->max_key(), &job->next)) continue;
      compact_pointer_[l] = f->max_key();
      return job;
    }
  }
  return nullptr;
}

void MainLsm::maybe_schedule_compaction() {
  while (running_compactions_ < std::max<uint32_t>(opts_.compaction_workers, 1)) {
    auto job = pick_compaction();
    if (!job) return;
    for (const auto& f : job->inputs) f->being_compacted = true;
    for (const auto& f : job->next) f->being_compacted = true;
    ++running_compactions_;
    run_compaction(std::shared_ptr<CompactionJob>(std::move(job)));
  }
}

void MainLsm::run_compaction(std::shared_ptr<CompactionJob> job) {
  // Read phase: pull every input image over the block interface and merge.
  sim::IoCost read;
  auto& src = dev_.block_source();
  std::map<std::string, Entry, std::less<>> merged;
  auto absorb = [&](const SstPtr& f) {
    auto image = f->load_image(src, &read);
    for (auto& e : parse_sst_image(image)) {
      auto it = merged.find(e.key);
      if (it == merged.end()) {
        std::string k = e.key;
        merged.emplace(std::move(k), std::move(e));
      } else if (it->second.seq < e.seq) {
        it->second = std::move(e);
      }
    }
  };
  for (const auto& f : job->inputs) absorb(f);
  for (const auto& f : job->next) absorb(f);
  job->bytes_in = read.get(sim::Channel::kBlockD2H);

  const bool drop_tombstones = is_bottom(job->level + 1) && (!drop_allowed_ || drop_allowed_());
  SstBuilder b;
  for (auto& [k, e] : merged) {
    if (drop_tombstones && e.tombstone) continue;
    b.add(e);
    if (b.estimated_size() >= opts_.sst_target_bytes) job->outputs.push_back(b.finish());
  }
  if (!b.empty()) job->outputs.push_back(b.finish());
  const uint64_t ps = dev_.space().page_size;
  for (const auto& img : job->outputs) job->bytes_out += (img.bytes.size() + ps - 1) / ps * ps;

  sim_.execute(
      read,
      [this, job] {
        // CPU phase: the merge itself; the bus is idle for this job. An
        // L0->L1 merge is split by key range over idle workers.
        sim::IoCost cpu;
        cpu.host_cpu_us = sim_.compaction_cpu_us(job->bytes_in, job->bytes_out);
        if (job->level == 0 && job->outputs.size() > 1) {
          uint32_t workers = std::max<uint32_t>(opts_.compaction_workers, 1);
          uint32_t idle = workers > running_compactions_ ? workers - running_compactions_ : 0;
          job->helpers = std::min<uint32_t>(idle, static_cast<uint32_t>(job->outputs.size() - 1));
          running_compactions_ += job->helpers;
          cpu.host_cpu_us = (cpu.host_cpu_us + job->helpers) / (job->helpers + 1);
          // execute() meters one thread; account for the helpers too.
          sim_.cpu().record(sim::CpuKind::kBackground, sim_.now(), cpu.host_cpu_us * job->helpers);
        }
        sim_.execute(
            cpu,
            [this, job] {
              if (job->helpers > 0) {
                running_compactions_ -= job->helpers;
                job->helpers = 0;
                maybe_schedule_compaction();
              }
              sim::IoCost write;
              for (const auto& img : job->outputs) job->out_extents.push_back(write_image(img.bytes, &write));
              sim_.execute(write, [this, job] { install_compaction(*job); }, sim::CpuKind::kBackground);
            },
            sim::CpuKind::kBackground);
      },
      sim::CpuKind::kBackground);
}

void MainLsm::install_compaction(const CompactionJob& job) {
  auto drop = [](std::vector<SstPtr>& files, const std::vector<SstPtr>& gone) {
    std::erase_if(files, [&](const SstPtr& f) {
      return std::find(gone.begin(), gone.end(), f) != gone.end();
    });
  };
  drop(levels_[job.level], job.inputs);
  auto& target = levels_[job.level + 1];
  drop(target, job.next);
  const int out_level = static_cast<int>(job.level + 1);
  for (size_t i = 0; i < job.outputs.size(); ++i) {
    SstImage img = job.outputs[i];
    target.push_back(std::make_shared<SsTable>(next_sst_id_++, out_level, std::move(img), job.out_extents[i]));
  }
  std::sort(target.begin(), target.end(),
            [](const SstPtr& a, const SstPtr& b) { return a->min_key() < b->min_key(); });
  for (const auto& f : job.inputs) release(f->extents());
  for (const auto& f : job.next) release(f->extents());

  counters_.compactions += 1;
  counters_.compaction_bytes_read += job.bytes_in;
  counters_.compaction_bytes_written += job.bytes_out;
  if (job.level == 0) l0_compaction_running_ = false;
  --running_compactions_;
  maybe_schedule_compaction();
  notify();
}

bool MainLsm::background_idle() const {
  if (flush_running_ || !imms_.empty() || running_compactions_ > 0) return false;
  if (levels_[0].size() >= opts_.l0_compaction_trigger) return false;
  for (size_t l = 1; l + 1 < levels_.size(); ++l) {
    if (level_bytes(l) > level_target(l)) return false;
  }
  return true;
}

void MainLsm::check_invariants() const {
  auto fail = [](const std::string& what) { throw std::logic_error("main-lsm invariant: " + what); };
  uint64_t pages = 0;
  for (size_t l = 0; l < levels_.size(); ++l) {
    const auto& files = levels_[l];
    for (size_t i = 0; i < files.size(); ++i) {
      const auto& idx = files[i]->index();
      for (size_t j = 1; j < idx.size(); ++j) {
        if (!(idx[j - 1].key < idx[j].key)) fail("unsorted SST " + std::to_string(files[i]->id()));
      }
      if (l > 0 && i > 0 && !(files[i - 1]->max_key() < files[i]->min_key())) {
        fail("overlapping SSTs in level " + std::to_string(l));
      }
      pages += device::total_pages(files[i]->extents());
    }
  }
  if (imms_.size() > std::max<uint32_t>(opts_.max_immutable, 1)) fail("too many immutable memtables");
  if (active_->map.size() > 1 && active_->bytes > opts_.memtable_bytes) fail("memtable over capacity");
  if (!flush_running_ && running_compactions_ == 0 && pages != alloc_.used_pages()) {
    fail("block pages leaked: " + std::to_string(alloc_.used_pages()) + " used vs " +
         std::to_string(pages) + " live");
  }
}

}  // namespace kvaccel
