#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "kvaccel/config.h"
#include "kvaccel/sim/bandwidth.h"
#include "kvaccel/sim/event_loop.h"

namespace kvaccel::sim {

// Resource demand of one logical operation: bytes per ledger channel plus
// host and device-controller CPU time. Storage layers accumulate into an
// IoCost; Simulator::execute turns it into virtual time.
struct IoCost {
  std::array<uint64_t, kNumChannels> bytes{};
  SimTime host_cpu_us = 0;
  SimTime device_busy_us = 0;
  uint32_t device_commands = 0;
  uint32_t sst_probes = 0;

  void add(Channel c, uint64_t n) { bytes[static_cast<size_t>(c)] += n; }
  uint64_t get(Channel c) const { return bytes[static_cast<size_t>(c)]; }
  uint64_t total_bytes() const;
  IoCost& operator+=(const IoCost& o);
  bool empty() const { return total_bytes() == 0 && host_cpu_us == 0 && device_busy_us == 0; }
};

// Single FIFO server: models the device's one controller core.
class FifoServer {
 public:
  // Reserves `duration` starting no earlier than `now`; returns finish time.
  SimTime reserve(SimTime now, SimTime duration);
  SimTime busy_until() const { return busy_until_; }
  SimTime busy_total() const { return busy_total_; }

 private:
  SimTime busy_until_ = 0;
  SimTime busy_total_ = 0;
};

enum class CpuKind : uint8_t { kBackground, kForeground };

// Host CPU time per one-second interval.
class CpuMeter {
 public:
  void record(CpuKind kind, SimTime from, SimTime duration);
  SimTime total(CpuKind kind) const { return totals_[static_cast<size_t>(kind)]; }
  SimTime in_interval(size_t interval, CpuKind kind) const;

 private:
  std::vector<std::array<SimTime, 2>> intervals_;
  std::array<SimTime, 2> totals_{};
};

// The simulation core: clock + event queue, bandwidth ledger, fair-share
// transfers, the device controller core and host CPU accounting. Everything
// runs on one thread; components call back into it from event handlers.
class Simulator {
 public:
  using Callback = std::function<void()>;

  explicit Simulator(const SimOptions& opts);
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  const SimOptions& options() const { return opts_; }
  SimTime now() const { return loop_.now(); }
  EventLoop& loop() { return loop_; }
  const EventLoop& loop() const { return loop_; }
  BandwidthLedger& ledger() { return ledger_; }
  const BandwidthLedger& ledger() const { return ledger_; }
  TransferScheduler& transfers() { return transfers_; }
  FifoServer& device_core() { return device_core_; }
  CpuMeter& cpu() { return cpu_; }
  const CpuMeter& cpu() const { return cpu_; }

  // Starts a transfer immediately and returns its completion time assuming
  // no later arrivals; `done` fires at the actual completion time.
  SimTime charge_transfer(Interface iface, Direction dir, uint64_t bytes,
                          TransferScheduler::Callback done = {});
  SimTime charge_internal(uint64_t bytes, TransferScheduler::Callback done = {});

  // Runs `cost` as: host CPU time, then device-core time, then all channel
  // transfers concurrently. `done` fires once everything has finished.
  void execute(const IoCost& cost, Callback done, CpuKind cpu_kind = CpuKind::kForeground);

  // Duration of a compaction CPU merge over the given byte volumes.
  SimTime compaction_cpu_us(uint64_t bytes_in, uint64_t bytes_out) const;

  EventId after(SimTime delay, EventKind kind, Callback cb) {
    return loop_.schedule_after(delay, kind, std::move(cb));
  }

 private:
  SimOptions opts_;
  EventLoop loop_;
  BandwidthLedger ledger_;
  TransferScheduler transfers_;
  FifoServer device_core_;
  CpuMeter cpu_;
};

}  // namespace kvaccel::sim
