#include "kvaccel/sim/simulator.h"

#include <algorithm>
#include <cmath>
#include <memory>

namespace kvaccel::sim {

uint64_t IoCost::total_bytes() const {
  uint64_t sum = 0;
  for (uint64_t b : bytes) sum += b;
  return sum;
}

IoCost& IoCost::operator+=(const IoCost& o) {
  for (size_t i = 0; i < kNumChannels; ++i) bytes[i] += o.bytes[i];
  host_cpu_us += o.host_cpu_us;
  device_busy_us += o.device_busy_us;
  device_commands += o.device_commands;
  sst_probes += o.sst_probes;
  return *this;
}

SimTime FifoServer::reserve(SimTime now, SimTime duration) {
  SimTime start = std::max(now, busy_until_);
  busy_until_ = start + duration;
  busy_total_ += duration;
  return busy_until_;
}

void CpuMeter::record(CpuKind kind, SimTime from, SimTime duration) {
  size_t k = static_cast<size_t>(kind);
  totals_[k] += duration;
  SimTime t = from;
  SimTime end = from + duration;
  while (t < end) {
    size_t idx = static_cast<size_t>(t / kMicrosPerSecond);
    SimTime boundary = static_cast<SimTime>(idx + 1) * kMicrosPerSecond;
    SimTime part = std::min(boundary, end) - t;
    if (idx >= intervals_.size()) intervals_.resize(idx + 1, {0, 0});
    intervals_[idx][k] += part;
    t += part;
  }
}

SimTime CpuMeter::in_interval(size_t interval, CpuKind kind) const {
  if (interval >= intervals_.size()) return 0;
  return intervals_[interval][static_cast<size_t>(kind)];
}

Simulator::Simulator(const SimOptions& opts)
    : opts_(opts),
      ledger_(opts.bus_capacity, opts.device_capacity),
      transfers_(loop_, ledger_) {}

SimTime Simulator::charge_transfer(Interface iface, Direction dir, uint64_t bytes,
                                   TransferScheduler::Callback done) {
  TransferId id = transfers_.start(channel_of(iface, dir), bytes, std::move(done));
  return transfers_.projected_completion(id);
}

SimTime Simulator::charge_internal(uint64_t bytes, TransferScheduler::Callback done) {
  TransferId id = transfers_.start(Channel::kInternal, bytes, std::move(done));
  return transfers_.projected_completion(id);
}

SimTime Simulator::compaction_cpu_us(uint64_t bytes_in, uint64_t bytes_out) const {
  if (opts_.compaction_cpu_ns_per_byte < 0.0) {
    double secs = static_cast<double>(bytes_in + bytes_out) / static_cast<double>(opts_.device_capacity);
    return static_cast<SimTime>(std::ceil(secs * kMicrosPerSecond));
  }
  return static_cast<SimTime>(
      std::ceil(opts_.compaction_cpu_ns_per_byte * static_cast<double>(bytes_in) / 1000.0));
}

void Simulator::execute(const IoCost& cost, Callback done, CpuKind cpu_kind) {
  auto start_transfers = [this, cost, done = std::move(done)]() mutable {
    size_t n = 0;
    for (uint64_t b : cost.bytes) n += b > 0 ? 1 : 0;
    if (n == 0) {
      loop_.schedule_after(0, EventKind::kOpArrival, std::move(done));
      return;
    }
    auto remaining = std::make_shared<size_t>(n);
    auto shared_done = std::make_shared<Callback>(std::move(done));
    for (size_t c = 0; c < kNumChannels; ++c) {
      if (cost.bytes[c] == 0) continue;
      transfers_.start(static_cast<Channel>(c), cost.bytes[c], [remaining, shared_done](SimTime) {
        if (--*remaining == 0 && *shared_done) (*shared_done)();
      });
    }
  };

  auto after_cpu = [this, cost, next = std::move(start_transfers)]() mutable {
    if (cost.device_busy_us > 0) {
      SimTime finish = device_core_.reserve(loop_.now(), cost.device_busy_us);
      loop_.schedule(finish, EventKind::kDeviceWork, std::move(next));
    } else {
      next();
    }
  };

  if (cost.host_cpu_us > 0) {
    cpu_.record(cpu_kind, loop_.now(), cost.host_cpu_us);
    loop_.schedule_after(cost.host_cpu_us, EventKind::kOpArrival, std::move(after_cpu));
  } else {
    after_cpu();
  }
}

}  // namespace kvaccel::sim
