#include "kvaccel/accel/accel_store.h"

#include <stdexcept>
#include <unordered_map>

#include "kvaccel/query/dual_iterator.h"

namespace kvaccel {

using sim::EventKind;

struct AccelStore::RollbackJob {
  uint64_t generation = 0;
  uint64_t snapshot = 0;  // device mutation count at scan time
  std::vector<device::Chunk> chunks;
  std::vector<std::vector<Entry>> entries;  // records completed in each chunk
  size_t chunk = 0;
  size_t pos = 0;
  bool paused = false;
  std::unordered_map<std::string, uint64_t> merged;  // key -> seq merged by this job
  RollbackReport report;
};

namespace {

// Groups reassembled records by the chunk in which they complete.
std::vector<std::vector<Entry>> entries_by_chunk(const std::vector<device::Chunk>& chunks) {
  std::vector<std::vector<Entry>> out(chunks.size());
  bool pending = false;
  Entry partial;
  for (size_t i = 0; i < chunks.size(); ++i) {
    std::span<const uint8_t> in(chunks[i].bytes);
    while (!in.empty()) {
      auto v = record::parse(in);
      in = in.subspan(v.size);
      if (pending) {
        partial.value.append(v.value);
      } else {
        partial = v.to_entry();
      }
      pending = v.continuation();
      if (!pending) out[i].push_back(std::move(partial));
    }
  }
  return out;
}

}  // namespace

AccelStore::AccelStore(const Config& cfg) : cfg_(cfg) {
  cfg_.validate();
  sim_ = std::make_unique<sim::Simulator>(cfg_.sim);
  dev_ = std::make_unique<device::HybridDevice>(cfg_.device, *sim_);
  lsm_ = std::make_unique<MainLsm>(cfg_.lsm, cfg_.accel.policy == Policy::kBaselineSlowdown, *sim_, *dev_);
  lsm_->on_state_change([this] { on_lsm_change(); });
  lsm_->set_tombstone_drop_allowed([this] { return dev_->dev_lsm().empty(); });
  published_ = lsm_->stall_status();
  sim_->after(cfg_.accel.detector_period_ms * 1000, EventKind::kDetectorTick, [this] { detector_tick(); });
}

AccelStore::~AccelStore() = default;

void AccelStore::on_lsm_change() {
  if (waiters_.empty()) return;
  auto ready = std::move(waiters_);
  waiters_.clear();
  for (auto& cb : ready) sim_->after(0, EventKind::kOpArrival, std::move(cb));
}

void AccelStore::when_state_changes(std::function<void()> cb) { waiters_.push_back(std::move(cb)); }

// ---- write and read paths ----

bool AccelStore::try_redirect(const Entry& e, WriteResult* out) {
  auto st = dev_->kv_put(e, &out->cost);
  if (st == device::DeviceStatus::kOk) {
    metadata_.insert(e.key, e.seq);
    out->route = Route::kDev;
    ++counters_.redirected_writes;
    ++mutations_;
    last_client_write_ = sim_->now();
    return true;
  }
  if (st == device::DeviceStatus::kDeviceFull) {
    device_full_ = true;
    ++counters_.device_full;
    return false;
  }
  throw std::logic_error("kv-put rejected: " + std::string(device::to_string(st)));
}

WriteResult AccelStore::write(Entry e) {
  WriteResult out;
  out.cost.host_cpu_us = cfg_.host.put_us;
  e.seq = ++seq_;
  out.seq = e.seq;
  const bool accel = cfg_.accel.policy == Policy::kKvAccel;
  const Verdict v = published_.verdict;
  const bool redirect = escalated_ || v == Verdict::kStall ||
                        (cfg_.accel.redirect_on_slowdown && v == Verdict::kSlowdown);
  if (accel && redirect && !device_full_ && try_redirect(e, &out)) return out;

  PutOutcome o = lsm_->put_local(e);
  if (o.blocked) {
    if (accel && !device_full_) {
      if (!escalated_) ++counters_.escalations;
      escalated_ = true;
      if (try_redirect(e, &out)) return out;
    }
    out.blocked = true;
    out.reason = o.reason;
    return out;
  }
  if (metadata_.contains(e.key)) metadata_.erase(e.key);
  out.route = Route::kMain;
  out.delay_us = o.delay_us;
  ++mutations_;
  last_client_write_ = sim_->now();
  return out;
}

WriteResult AccelStore::put(std::string_view key, std::string_view value) {
  if (key.empty()) throw std::invalid_argument("empty key");
  return write(Entry{std::string(key), std::string(value), 0, false});
}

WriteResult AccelStore::del(std::string_view key) {
  if (key.empty()) throw std::invalid_argument("empty key");
  return write(Entry{std::string(key), std::string(), 0, true});
}

ReadResult AccelStore::get(std::string_view key) {
  ReadResult out;
  out.cost.host_cpu_us = cfg_.host.get_us;
  if (!dev_->dev_lsm().empty() && metadata_.contains(key)) {
    std::optional<Entry> e;
    dev_->kv_get(key, &e, &out.cost);
    out.route = Route::kDev;
    ++counters_.dev_reads;
    if (e && !e->tombstone) out.value = std::move(e->value);
    return out;
  }
  ++counters_.main_reads;
  if (auto e = lsm_->get_local(key, &out.cost)) out.value = std::move(e->value);
  return out;
}

std::vector<KeyValue> AccelStore::range(std::string_view start, size_t n, sim::IoCost* cost) {
  DualIterator it(*this, cost);
  return it.range(start, n);
}

// ---- detector ----

void AccelStore::detector_tick() {
  published_ = lsm_->stall_status();
  escalated_ = false;
  ++counters_.detector_ticks;
  if (job_ && job_->paused && published_.verdict != Verdict::kStall) {
    job_->paused = false;
    deliver_chunk();
  } else {
    maybe_start_rollback();
  }
  sim_->after(cfg_.accel.detector_period_ms * 1000, EventKind::kDetectorTick, [this] { detector_tick(); });
}

void AccelStore::maybe_start_rollback() {
  if (job_ || !cfg_.accel.rollback_enabled || cfg_.accel.policy != Policy::kKvAccel) return;
  if (dev_->dev_lsm().empty()) return;
  if (cfg_.accel.rollback_mode == RollbackMode::kEager) {
    if (published_.verdict != Verdict::kStall) start_rollback();
  } else if (published_.verdict == Verdict::kNormal &&
             sim_->now() - last_client_write_ >= cfg_.accel.lazy_quiet_ms * 1000) {
    start_rollback();
  }
}

// ---- rollback ----

bool AccelStore::rollback_active() const { return job_ != nullptr; }

void AccelStore::start_rollback() {
  job_ = std::make_unique<RollbackJob>();
  job_->generation = ++job_generation_;
  ++counters_.rollbacks_started;
  begin_pass();
}

void AccelStore::begin_pass() {
  RollbackJob& job = *job_;
  ++job.report.passes;
  ++counters_.rollback_passes;
  job.snapshot = dev_->dev_lsm().mutations();
  const auto& lo = dev_->dev_lsm().min_key();
  const auto& hi = dev_->dev_lsm().max_key();
  device::ScanResult scan = dev_->scan_bulk(lo ? *lo : std::string(), hi);
  job.entries = entries_by_chunk(scan.chunks);
  job.chunks = std::move(scan.chunks);
  job.chunk = 0;
  job.pos = 0;
  const uint64_t gen = job.generation;
  sim_->execute(scan.scan, [this, gen] {
    if (job_ && job_->generation == gen) deliver_chunk();
  });
}

void AccelStore::deliver_chunk() {
  RollbackJob& job = *job_;
  if (job.chunk == job.chunks.size()) {
    finish_rollback();
    return;
  }
  sim::IoCost c;
  const uint64_t bytes = job.chunks[job.chunk].bytes.size();
  c.add(sim::Channel::kKvD2H, bytes);
  ++job.report.chunks;
  ++counters_.rollback_chunks;
  counters_.rollback_bytes += bytes;
  const uint64_t gen = job.generation;
  sim_->execute(c, [this, gen] {
    if (job_ && job_->generation == gen) merge_chunk();
  });
}

void AccelStore::merge_chunk() {
  RollbackJob& job = *job_;
  const uint64_t gen = job.generation;
  auto& records = job.entries[job.chunk];
  for (; job.pos < records.size(); ++job.pos) {
    const Entry& e = records[job.pos];
    auto meta = metadata_.seq_of(e.key);
    if (meta && *meta == e.seq) {
      PutOutcome o = lsm_->put_local(e);
      if (o.blocked) {
        when_state_changes([this, gen] {
          if (job_ && job_->generation == gen) merge_chunk();
        });
        return;
      }
      metadata_.erase(e.key);
      job.merged[e.key] = e.seq;
      ++job.report.merged;
      ++counters_.rollback_merged;
      ++mutations_;
    } else if (auto m = job.merged.find(e.key); m != job.merged.end() && m->second == e.seq) {
      // Merged in an earlier pass of this job.
    } else {
      ++job.report.stale;
      ++counters_.rollback_stale;
    }
  }
  sim::IoCost cpu;
  cpu.host_cpu_us = static_cast<sim::SimTime>(records.size()) * cfg_.accel.rollback_record_us;
  sim_->execute(
      cpu,
      [this, gen] {
        if (job_ && job_->generation == gen) after_chunk();
      },
      sim::CpuKind::kBackground);
}

void AccelStore::after_chunk() {
  RollbackJob& job = *job_;
  ++job.chunk;
  job.pos = 0;
  if (job.chunk < job.chunks.size() && lsm_->stall_status().verdict == Verdict::kStall) {
    job.paused = true;
    ++job.report.pauses;
    ++counters_.rollback_pauses;
    return;
  }
  deliver_chunk();
}

void AccelStore::finish_rollback() {
  if (dev_->dev_lsm().mutations() != job_->snapshot) {
    begin_pass();
    return;
  }
  sim::IoCost c;
  dev_->kv_reset(&c);
  metadata_.clear();
  device_full_ = false;
  ++mutations_;
  last_rollback_ = job_->report;
  ++counters_.rollbacks_completed;
  job_.reset();
  sim_->execute(c, [] {});
}

bool AccelStore::rollback_start() {
  if (job_ || dev_->dev_lsm().empty() || published_.verdict == Verdict::kStall) return false;
  start_rollback();
  return true;
}

uint64_t AccelStore::rollback_execute() {
  if (published_.verdict == Verdict::kStall) {
    throw std::logic_error("rollback requested while the detector reports a stall");
  }
  if (!job_) {
    if (dev_->dev_lsm().empty()) {
      last_rollback_ = RollbackReport{};
      return 0;
    }
    start_rollback();
  }
  const uint64_t gen = job_->generation;
  const sim::SimTime limit = sim_->now() + 24 * 3600 * sim::kMicrosPerSecond;
  bool done = sim_->loop().run_while_not([&] { return !job_ || job_->generation != gen; }, limit);
  if (!done) throw std::runtime_error("rollback did not finish");
  return last_rollback_.merged;
}

// ---- crash and recovery ----

void AccelStore::simulate_crash() {
  metadata_.clear();
  job_.reset();
  ++job_generation_;
  escalated_ = false;
}

size_t AccelStore::recover_metadata() {
  metadata_.clear();
  if (dev_->dev_lsm().empty()) return 0;
  device::ScanResult scan = dev_->scan_bulk("", std::nullopt);
  sim::IoCost cost = scan.scan;
  for (const auto& ch : scan.chunks) cost.add(sim::Channel::kKvD2H, ch.bytes.size());
  for (const auto& e : device::parse_chunks(scan.chunks)) {
    // A host version with an equal seq is a copy merged by rollback.
    auto host = lsm_->get_version(e.key, &cost);
    if (!host || host->seq < e.seq) metadata_.insert(e.key, e.seq);
  }
  sim_->execute(cost, [] {});
  return metadata_.size();
}

// ---- time ----

void AccelStore::advance(sim::SimTime us) { sim_->loop().advance_until(sim_->now() + us); }

bool AccelStore::settle(sim::SimTime limit_us) {
  return sim_->loop().run_while_not([&] { return lsm_->background_idle() && !job_; },
                                    sim_->now() + limit_us);
}

}  // namespace kvaccel
