#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "kvaccel/sim/event_loop.h"

namespace kvaccel::sim {

enum class Interface : uint8_t { kBlock, kKv };
enum class Direction : uint8_t { kHostToDevice, kDeviceToHost };

// Ledger channels. The four host channels cross the bus; kInternal is
// device-side media traffic (Dev-LSM flush, compaction, probes) that only
// consumes device bandwidth.
enum class Channel : uint8_t { kBlockH2D, kBlockD2H, kKvH2D, kKvD2H, kInternal };
constexpr size_t kNumChannels = 5;

Channel channel_of(Interface iface, Direction dir);
std::string_view to_string(Channel c);
inline bool crosses_bus(Channel c) { return c != Channel::kInternal; }

// Bytes moved per one-second interval and channel. Amounts are stored in
// micro-bytes so that fractional progress of concurrent transfers is exact:
// a rate of R bytes/s advances R micro-bytes per microsecond.
class BandwidthLedger {
 public:
  static constexpr int64_t kMicro = 1'000'000;

  BandwidthLedger(uint64_t bus_capacity, uint64_t device_capacity)
      : bus_capacity_(bus_capacity), device_capacity_(device_capacity) {}

  // Credits `micro_bytes` moved at `rate` micro-bytes/us starting at `from`;
  // the amount is laid out in time order, at most rate * overlap per interval.
  void credit(Channel c, SimTime from, int64_t rate, int64_t micro_bytes);
  void record_completion(uint64_t bytes) { completed_bytes_ += bytes; }

  size_t num_intervals() const { return intervals_.size(); }
  int64_t micro_bytes(size_t interval, Channel c) const;
  double bytes(size_t interval, Channel c) const {
    return static_cast<double>(micro_bytes(interval, c)) / kMicro;
  }
  uint64_t total_bytes(Channel c) const;
  uint64_t total_bus_bytes() const;
  uint64_t total_device_bytes() const;
  uint64_t completed_request_bytes() const { return completed_bytes_; }

  // Transferred / capacity over one full interval, both in [0, 1].
  double bus_utilization(size_t interval) const;
  double device_utilization(size_t interval) const;
  // Host<->device traffic normalised by the usable link rate
  // min(bus, device): the quantity plotted against the SSD's peak bandwidth.
  double link_utilization(size_t interval) const;

  uint64_t bus_capacity() const { return bus_capacity_; }
  uint64_t device_capacity() const { return device_capacity_; }

 private:
  using Row = std::array<int64_t, kNumChannels>;
  Row& row(size_t interval);
  int64_t bus_micro(size_t interval) const;
  int64_t device_micro(size_t interval) const;

  uint64_t bus_capacity_;
  uint64_t device_capacity_;
  std::vector<Row> intervals_;
  uint64_t completed_bytes_ = 0;
};

using TransferId = uint64_t;

// Fluid fair-share model of concurrent transfers. Every active transfer
// consumes the device; host transfers also consume the bus. Each transfer
// advances at min(device/n_device, bus/n_bus) and the split is recomputed
// whenever a transfer starts or finishes.
class TransferScheduler {
 public:
  using Callback = std::function<void(SimTime)>;

  TransferScheduler(EventLoop& loop, BandwidthLedger& ledger) : loop_(loop), ledger_(ledger) {}
  TransferScheduler(const TransferScheduler&) = delete;
  TransferScheduler& operator=(const TransferScheduler&) = delete;

  // bytes must be positive. `done` runs at the completion time.
  TransferId start(Channel channel, uint64_t bytes, Callback done = {});

  // Completion time of `id` if no further transfers arrive.
  SimTime projected_completion(TransferId id) const;

  size_t active() const { return active_.size(); }
  bool idle() const { return active_.empty(); }
  uint64_t started_bytes() const { return started_bytes_; }

 private:
  struct Active {
    TransferId id;
    Channel channel;
    uint64_t bytes;
    int64_t remaining;  // micro-bytes
    Callback done;
  };

  int64_t rate_of(const Active& t) const;  // bytes/s == micro-bytes/us
  void advance_to(SimTime now);
  void reschedule();
  void on_timer();

  EventLoop& loop_;
  BandwidthLedger& ledger_;
  std::vector<Active> active_;
  int64_t n_bus_ = 0;  // active transfers that cross the bus
  SimTime last_update_ = 0;
  EventId timer_ = 0;
  TransferId next_id_ = 1;
  uint64_t started_bytes_ = 0;
};

}  // namespace kvaccel::sim
