#include "kvaccel/bench/workload.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>

#include "kvaccel/accel/accel_store.h"

namespace kvaccel::bench {

using sim::kMicrosPerSecond;
using sim::SimTime;

WorkloadSpec WorkloadSpec::from_name(std::string_view name) {
  WorkloadSpec s;
  if (name.size() != 1) throw std::invalid_argument("unknown workload: " + std::string(name));
  s.name = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
  switch (s.name) {
    case 'A':
      break;
    case 'B':
      s.write_weight = 9;
      s.read_weight = 1;
      break;
    case 'C':
      s.write_weight = 8;
      s.read_weight = 2;
      break;
    case 'D':
      s.write_weight = 0;
      s.ranges = true;
      break;
    default:
      throw std::invalid_argument("unknown workload: " + std::string(name));
  }
  return s;
}

int64_t nearest_rank(std::vector<int64_t> values, double p) {
  if (values.empty()) return 0;
  if (!(p > 0 && p <= 1)) throw std::invalid_argument("percentile out of range");
  auto rank = static_cast<size_t>(std::ceil(p * static_cast<double>(values.size())));
  rank = std::clamp<size_t>(rank, 1, values.size());
  std::nth_element(values.begin(), values.begin() + static_cast<ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

namespace {

constexpr SimTime kNever = std::numeric_limits<SimTime>::max();

class Runner {
 public:
  Runner(const Config& cfg, const WorkloadSpec& spec)
      : cfg_(cfg),
        spec_(spec),
        store_(cfg),
        write_rng_(cfg.sim.seed),
        read_rng_(cfg.sim.seed ^ 0x9e3779b97f4a7c15ull),
        value_(cfg.workload.value_size, 'v') {
    if (cfg.workload.key_size < 8 && cfg.workload.key_space > (1ull << (8 * cfg.workload.key_size))) {
      throw ConfigError("key_space does not fit in key_size bytes");
    }
  }

  RunResult run();

 private:
  sim::Simulator& sim() { return store_.sim(); }
  SimTime now() { return sim().now(); }

  std::string make_key(uint64_t k) const;
  bool may_issue() const;
  size_t interval_of(SimTime t) const { return static_cast<size_t>((t - start_) / kMicrosPerSecond); }
  MetricsSample* sample_at(SimTime t);

  void begin_measure();
  void next_write();
  void attempt_write();
  void write_done(SimTime issued);
  void maybe_read();
  void read_done(SimTime issued);
  void next_range();
  void range_done(SimTime issued);
  void sample_tick();
  void check_invariants();
  void violation(std::string what);
  void add_blocked(SimTime from, SimTime to);

  const Config& cfg_;
  WorkloadSpec spec_;
  AccelStore store_;
  std::mt19937_64 write_rng_;
  std::mt19937_64 read_rng_;
  std::string value_;

  bool preloading_ = false;
  uint64_t preload_done_ = 0;
  SimTime start_ = 0;
  SimTime end_ = kNever;

  std::string key_;
  SimTime first_issue_ = 0;
  std::optional<SimTime> blocked_since_;
  uint64_t write_counter_ = 0;
  uint64_t writes_issued_ = 0;
  uint64_t reads_issued_ = 0;
  bool reader_busy_ = false;
  uint64_t ops_issued_ = 0;
  uint64_t ops_done_ = 0;
  bool was_stalled_ = false;
  uint64_t stall_episodes_ = 0;

  std::vector<MetricsSample> samples_;
  std::vector<int64_t> write_lat_;
  std::vector<int64_t> read_lat_;
  std::vector<int64_t> range_lat_;
  std::vector<std::string> violations_;
  uint64_t violation_count_ = 0;
};

std::string Runner::make_key(uint64_t k) const {
  const uint32_t n = cfg_.workload.key_size;
  std::string s(n, '\0');
  for (uint32_t i = 0; i < n && i < 8; ++i) {
    s[n - 1 - i] = static_cast<char>((k >> (8 * i)) & 0xff);
  }
  return s;
}

bool Runner::may_issue() const {
  if (preloading_) return true;
  if (store_.sim().now() >= end_) return false;
  return cfg_.workload.max_ops == 0 || ops_issued_ < cfg_.workload.max_ops;
}

MetricsSample* Runner::sample_at(SimTime t) {
  if (preloading_ || t < start_ || t >= end_) return nullptr;
  size_t i = interval_of(t);
  return i < samples_.size() ? &samples_[i] : nullptr;
}

void Runner::violation(std::string what) {
  ++violation_count_;
  if (violations_.size() < 16) violations_.push_back(std::move(what));
}

void Runner::check_invariants() {
  try {
    store_.lsm().check_invariants();
  } catch (const std::logic_error& e) {
    violation(std::string("host lsm: ") + e.what());
  }
  const auto& kv = store_.device().kv_allocator();
  if (store_.device().dev_lsm().empty() && kv.free_pages() != kv.capacity()) {
    violation("kv region leaks pages while the device LSM is empty");
  }
}

void Runner::add_blocked(SimTime from, SimTime to) {
  from = std::max(from, start_);
  to = std::min(to, end_);
  while (from < to) {
    MetricsSample* s = sample_at(from);
    if (!s) break;
    SimTime edge = start_ + static_cast<SimTime>(interval_of(from) + 1) * kMicrosPerSecond;
    SimTime stop = std::min(edge, to);
    s->stall_blocked_us += stop - from;
    from = stop;
  }
}

// ---- writer ----

void Runner::next_write() {
  if (!may_issue()) return;
  if (preloading_ && preload_done_ + 1 > cfg_.workload.preload_keys) return;
  key_ = make_key(write_rng_() % cfg_.workload.key_space);
  ++write_counter_;
  for (size_t i = 0; i < value_.size() && i < 8; ++i) {
    value_[i] = static_cast<char>('a' + ((write_counter_ >> (4 * i)) & 0xf));
  }
  first_issue_ = now();
  if (!preloading_) ++ops_issued_;
  attempt_write();
}

void Runner::attempt_write() {
  if (!preloading_ && now() >= end_) return;
  WriteResult r = store_.put(key_, value_);
  if (r.blocked) {
    if (auto* s = sample_at(now())) ++s->blocked_returns;
    if (!blocked_since_) blocked_since_ = now();
    store_.when_state_changes([this] { attempt_write(); });
    return;
  }
  if (blocked_since_) {
    add_blocked(*blocked_since_, now());
    blocked_since_.reset();
  }
  if (auto* s = sample_at(now())) {
    if (r.route == Route::kDev) ++s->redirected;
    if (r.delay_us > 0) ++s->slowdown_sleeps;
  }
  ++writes_issued_;
  maybe_read();
  const SimTime issued = first_issue_;
  const SimTime delay = r.delay_us;
  sim().execute(r.cost, [this, issued, delay] {
    if (delay > 0) {
      sim().after(delay, sim::EventKind::kOpArrival, [this, issued] { write_done(issued); });
    } else {
      write_done(issued);
    }
  });
}

void Runner::write_done(SimTime issued) {
  if (preloading_) {
    if (++preload_done_ >= cfg_.workload.preload_keys) {
      begin_measure();
      return;
    }
  } else if (auto* s = sample_at(now())) {
    ++s->writes;
    ++ops_done_;
    write_lat_.push_back(now() - issued);
  }
  next_write();
}

// ---- reader ----

void Runner::maybe_read() {
  if (spec_.read_weight == 0 || reader_busy_ || preloading_ || !may_issue()) return;
  // Read r may start once writes * read_weight >= r * write_weight.
  if ((reads_issued_ + 1) * spec_.write_weight > writes_issued_ * spec_.read_weight) return;
  reader_busy_ = true;
  ++reads_issued_;
  ++ops_issued_;
  ReadResult r = store_.get(make_key(read_rng_() % cfg_.workload.key_space));
  if (auto* s = sample_at(now())) ++(r.route == Route::kDev ? s->reads_dev : s->reads_main);
  const SimTime issued = now();
  sim().execute(r.cost, [this, issued] { read_done(issued); });
}

void Runner::read_done(SimTime issued) {
  reader_busy_ = false;
  if (auto* s = sample_at(now())) {
    ++s->reads;
    ++ops_done_;
    read_lat_.push_back(now() - issued);
  }
  maybe_read();
}

// ---- range actor ----

void Runner::next_range() {
  if (!may_issue()) return;
  ++ops_issued_;
  sim::IoCost cost;
  store_.range(make_key(read_rng_() % cfg_.workload.key_space), cfg_.workload.range_next, &cost);
  const SimTime issued = now();
  sim().execute(cost, [this, issued] { range_done(issued); });
}

void Runner::range_done(SimTime issued) {
  if (auto* s = sample_at(now())) {
    ++s->ranges;
    ++ops_done_;
    range_lat_.push_back(now() - issued);
  }
  next_range();
}

// ---- sampler ----

void Runner::sample_tick() {
  const SimTime t = now();
  if (t > end_) return;
  // A sample taken exactly on a boundary describes the interval it closes.
  size_t i = static_cast<size_t>((t - start_ - 1) / kMicrosPerSecond);
  if (i < samples_.size()) {
    StallStatus st = store_.stall_status();
    MetricsSample& s = samples_[i];
    ++s.ticks;
    if (st.verdict == Verdict::kStall) ++s.stall_ticks;
    if (st.verdict == Verdict::kSlowdown) ++s.slowdown_ticks;
    bool stalled = st.verdict == Verdict::kStall;
    if (stalled && !was_stalled_) ++stall_episodes_;
    was_stalled_ = stalled;
  }
  if ((t - start_) % kMicrosPerSecond == 0) check_invariants();
  sim().after(cfg_.accel.detector_period_ms * 1000, sim::EventKind::kDetectorTick,
              [this] { sample_tick(); });
}

void Runner::begin_measure() {
  preloading_ = false;
  start_ = (now() + kMicrosPerSecond - 1) / kMicrosPerSecond * kMicrosPerSecond;
  const auto dur = static_cast<SimTime>(std::llround(cfg_.workload.duration_s * kMicrosPerSecond));
  end_ = start_ + dur;
  samples_.resize(static_cast<size_t>((dur + kMicrosPerSecond - 1) / kMicrosPerSecond));
  for (size_t i = 0; i < samples_.size(); ++i) samples_[i].interval = i;
  if (dur == 0) return;
  sim().loop().schedule(start_, sim::EventKind::kOpArrival, [this] {
    sim().after(cfg_.accel.detector_period_ms * 1000, sim::EventKind::kDetectorTick,
                [this] { sample_tick(); });
    if (spec_.ranges) {
      next_range();
    } else {
      next_write();
    }
  });
}

RunResult Runner::run() {
  if (spec_.ranges && cfg_.workload.preload_keys > 0) {
    preloading_ = true;
    next_write();
    bool ok = sim().loop().run_while_not([this] { return !preloading_; }, kNever / 2);
    if (!ok) throw std::runtime_error("preload did not finish");
  } else {
    begin_measure();
  }

  const uint64_t max_ops = cfg_.workload.max_ops;
  sim().loop().run_while_not([&] { return max_ops > 0 && ops_done_ >= max_ops; }, end_);
  if (now() < end_) {
    // Stopped by op count: close the window at the next whole second.
    SimTime cut = start_ + (now() - start_ + kMicrosPerSecond - 1) / kMicrosPerSecond * kMicrosPerSecond;
    end_ = std::max(cut, start_ + kMicrosPerSecond);
    end_ = std::min<SimTime>(end_, start_ + static_cast<SimTime>(samples_.size()) * kMicrosPerSecond);
    samples_.resize(static_cast<size_t>((end_ - start_) / kMicrosPerSecond));
  }
  sim().loop().advance_until(end_);
  if (blocked_since_) add_blocked(*blocked_since_, end_);

  const auto& ledger = sim().ledger();
  const auto& cpu = sim().cpu();
  const size_t base = static_cast<size_t>(start_ / kMicrosPerSecond);
  std::array<int64_t, sim::kNumChannels> micro{};
  for (auto& s : samples_) {
    size_t abs = base + s.interval;
    // Rounded on the running sum so that rows add up to the report total.
    auto bytes = [&](sim::Channel c) {
      int64_t& acc = micro[static_cast<size_t>(c)];
      int64_t before = acc / sim::BandwidthLedger::kMicro;
      acc += ledger.micro_bytes(abs, c);
      return static_cast<uint64_t>(acc / sim::BandwidthLedger::kMicro - before);
    };
    s.block_h2d = bytes(sim::Channel::kBlockH2D);
    s.block_d2h = bytes(sim::Channel::kBlockD2H);
    s.kv_h2d = bytes(sim::Channel::kKvH2D);
    s.kv_d2h = bytes(sim::Channel::kKvD2H);
    s.internal = bytes(sim::Channel::kInternal);
    s.link_util = ledger.link_utilization(abs);
    s.bg_cpu_us = cpu.in_interval(abs, sim::CpuKind::kBackground);
    s.fg_cpu_us = cpu.in_interval(abs, sim::CpuKind::kForeground);
  }

  RunResult out;
  RunReport& r = out.report;
  r.workload = std::string(1, spec_.name);
  r.policy = std::string(to_string(cfg_.accel.policy));
  r.rollback_mode = std::string(to_string(cfg_.accel.rollback_mode));
  r.seed = cfg_.sim.seed;
  r.duration_s = static_cast<double>(end_ - start_) / kMicrosPerSecond;
  r.compaction_workers = cfg_.lsm.compaction_workers;
  r.preload_writes = preload_done_;
  int64_t bg_cpu = 0;
  for (const auto& s : samples_) {
    r.writes += s.writes;
    r.reads += s.reads;
    r.ranges += s.ranges;
    r.reads_main += s.reads_main;
    r.reads_dev += s.reads_dev;
    r.redirected += s.redirected;
    r.blocked_returns += s.blocked_returns;
    r.slowdown_events += s.slowdown_sleeps;
    r.stall_intervals += s.stalled() ? 1 : 0;
    r.zero_intervals += (spec_.ranges ? s.ranges : s.writes) == 0 ? 1 : 0;
    bg_cpu += s.bg_cpu_us;
  }
  auto total = [&](sim::Channel c) {
    return static_cast<uint64_t>(micro[static_cast<size_t>(c)] / sim::BandwidthLedger::kMicro);
  };
  r.block_h2d = total(sim::Channel::kBlockH2D);
  r.block_d2h = total(sim::Channel::kBlockD2H);
  r.kv_h2d = total(sim::Channel::kKvH2D);
  r.kv_d2h = total(sim::Channel::kKvD2H);
  r.internal = total(sim::Channel::kInternal);
  if (start_ == 0) {
    for (size_t c = 0; c < sim::kNumChannels; ++c) {
      if (total(static_cast<sim::Channel>(c)) != ledger.total_bytes(static_cast<sim::Channel>(c))) {
        violation("report bytes differ from the ledger on channel " +
                  std::string(to_string(static_cast<sim::Channel>(c))));
      }
    }
  }
  if (r.writes + r.reads + r.ranges != ops_done_) violation("interval op counts do not sum to the total");

  r.stall_episodes = stall_episodes_;
  r.rollbacks = store_.counters().rollbacks_completed;
  r.rollback_bytes = store_.counters().rollback_bytes;
  r.rollback_passes = store_.counters().rollback_passes;
  r.rollback_pauses = store_.counters().rollback_pauses;
  r.rollback_merged = store_.counters().rollback_merged;
  r.rollback_stale = store_.counters().rollback_stale;
  r.p99_write_us = nearest_rank(write_lat_, 0.99);
  r.p99_read_us = nearest_rank(read_lat_, 0.99);
  r.p99_range_us = nearest_rank(range_lat_, 0.99);
  if (r.duration_s > 0) {
    const double rec = cfg_.workload.key_size + cfg_.workload.value_size;
    r.ops_per_s = static_cast<double>(r.writes + r.reads + r.ranges) / r.duration_s;
    r.write_mb_per_s = static_cast<double>(r.writes) * rec / 1e6 / r.duration_s;
    r.cpu_pct = static_cast<double>(bg_cpu) /
                (r.duration_s * kMicrosPerSecond * cfg_.sim.host_cores) * 100.0;
    r.efficiency = r.cpu_pct > 0 ? r.write_mb_per_s / r.cpu_pct : 0.0;
  }
  r.violations = violations_;
  r.invariant_violations = violation_count_;
  out.samples = std::move(samples_);
  return out;
}

}  // namespace

RunResult run_workload(const Config& cfg, const WorkloadSpec& spec) {
  cfg.validate();
  Runner runner(cfg, spec);
  return runner.run();
}

}  // namespace kvaccel::bench
