#include "kvaccel/sim/bandwidth.h"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace kvaccel::sim {

Channel channel_of(Interface iface, Direction dir) {
  if (iface == Interface::kBlock) {
    return dir == Direction::kHostToDevice ? Channel::kBlockH2D : Channel::kBlockD2H;
  }
  return dir == Direction::kHostToDevice ? Channel::kKvH2D : Channel::kKvD2H;
}

std::string_view to_string(Channel c) {
  switch (c) {
    case Channel::kBlockH2D:
      return "block_h2d";
    case Channel::kBlockD2H:
      return "block_d2h";
    case Channel::kKvH2D:
      return "kv_h2d";
    case Channel::kKvD2H:
      return "kv_d2h";
    case Channel::kInternal:
      return "internal";
  }
  return "?";
}

BandwidthLedger::Row& BandwidthLedger::row(size_t interval) {
  if (interval >= intervals_.size()) intervals_.resize(interval + 1, Row{});
  return intervals_[interval];
}

void BandwidthLedger::credit(Channel c, SimTime from, int64_t rate, int64_t micro_bytes) {
  SimTime t = from;
  while (micro_bytes > 0) {
    size_t idx = static_cast<size_t>(t / kMicrosPerSecond);
    SimTime boundary = static_cast<SimTime>(idx + 1) * kMicrosPerSecond;
    int64_t room = rate * (boundary - t);
    int64_t part = std::min(room, micro_bytes);
    row(idx)[static_cast<size_t>(c)] += part;
    micro_bytes -= part;
    t = boundary;
  }
}

int64_t BandwidthLedger::micro_bytes(size_t interval, Channel c) const {
  if (interval >= intervals_.size()) return 0;
  return intervals_[interval][static_cast<size_t>(c)];
}

uint64_t BandwidthLedger::total_bytes(Channel c) const {
  int64_t sum = 0;
  for (const auto& r : intervals_) sum += r[static_cast<size_t>(c)];
  return static_cast<uint64_t>(sum / kMicro);
}

uint64_t BandwidthLedger::total_bus_bytes() const {
  int64_t sum = 0;
  for (size_t i = 0; i < intervals_.size(); ++i) sum += bus_micro(i);
  return static_cast<uint64_t>(sum / kMicro);
}

uint64_t BandwidthLedger::total_device_bytes() const {
  int64_t sum = 0;
  for (size_t i = 0; i < intervals_.size(); ++i) sum += device_micro(i);
  return static_cast<uint64_t>(sum / kMicro);
}

int64_t BandwidthLedger::bus_micro(size_t interval) const {
  if (interval >= intervals_.size()) return 0;
  const Row& r = intervals_[interval];
  int64_t sum = 0;
  for (size_t c = 0; c < kNumChannels; ++c) {
    if (crosses_bus(static_cast<Channel>(c))) sum += r[c];
  }
  return sum;
}

int64_t BandwidthLedger::device_micro(size_t interval) const {
  if (interval >= intervals_.size()) return 0;
  int64_t sum = 0;
  for (int64_t v : intervals_[interval]) sum += v;
  return sum;
}

double BandwidthLedger::bus_utilization(size_t interval) const {
  return static_cast<double>(bus_micro(interval)) /
         (static_cast<double>(bus_capacity_) * static_cast<double>(kMicrosPerSecond));
}

double BandwidthLedger::device_utilization(size_t interval) const {
  return static_cast<double>(device_micro(interval)) /
         (static_cast<double>(device_capacity_) * static_cast<double>(kMicrosPerSecond));
}

double BandwidthLedger::link_utilization(size_t interval) const {
  double cap = static_cast<double>(std::min(bus_capacity_, device_capacity_));
  return static_cast<double>(bus_micro(interval)) / (cap * static_cast<double>(kMicrosPerSecond));
}

TransferId TransferScheduler::start(Channel channel, uint64_t bytes, Callback done) {
  if (bytes == 0) throw std::invalid_argument("transfer of zero bytes");
  advance_to(loop_.now());
  TransferId id = next_id_++;
  active_.push_back(Active{id, channel, bytes,
                           static_cast<int64_t>(bytes) * BandwidthLedger::kMicro, std::move(done)});
  started_bytes_ += bytes;
  if (crosses_bus(channel)) ++n_bus_;
  reschedule();
  return id;
}

int64_t TransferScheduler::rate_of(const Active& t) const {
  int64_t n_dev = static_cast<int64_t>(active_.size());
  int64_t rate = static_cast<int64_t>(ledger_.device_capacity()) / n_dev;
  if (crosses_bus(t.channel)) {
    rate = std::min(rate, static_cast<int64_t>(ledger_.bus_capacity()) / n_bus_);
  }
  return std::max<int64_t>(rate, 1);
}

void TransferScheduler::advance_to(SimTime now) {
  SimTime dt = now - last_update_;
  if (dt > 0 && !active_.empty()) {
    std::vector<int64_t> rates;
    rates.reserve(active_.size());
    for (const auto& t : active_) rates.push_back(rate_of(t));
    for (size_t i = 0; i < active_.size(); ++i) {
      auto& t = active_[i];
      int64_t moved = std::min(t.remaining, rates[i] * dt);
      ledger_.credit(t.channel, last_update_, rates[i], moved);
      t.remaining -= moved;
    }
  }
  last_update_ = now;
}

SimTime TransferScheduler::projected_completion(TransferId id) const {
  for (const auto& t : active_) {
    if (t.id == id) {
      int64_t rate = rate_of(t);
      return last_update_ + (t.remaining + rate - 1) / rate;
    }
  }
  return loop_.now();
}

void TransferScheduler::reschedule() {
  if (timer_ != 0) {
    loop_.cancel(timer_);
    timer_ = 0;
  }
  if (active_.empty()) return;
  SimTime next = std::numeric_limits<SimTime>::max();
  for (const auto& t : active_) {
    int64_t rate = rate_of(t);
    next = std::min(next, last_update_ + (t.remaining + rate - 1) / rate);
  }
  timer_ = loop_.schedule(std::max(next, loop_.now()), EventKind::kTransferComplete,
                          [this] { on_timer(); });
}

void TransferScheduler::on_timer() {
  timer_ = 0;
  advance_to(loop_.now());
  std::vector<Active> finished;
  auto it = std::stable_partition(active_.begin(), active_.end(),
                                  [](const Active& t) { return t.remaining > 0; });
  std::move(it, active_.end(), std::back_inserter(finished));
  active_.erase(it, active_.end());
  for (const auto& t : finished) {
    ledger_.record_completion(t.bytes);
    if (crosses_bus(t.channel)) --n_bus_;
  }
  reschedule();
  SimTime now = loop_.now();
  for (auto& t : finished) {
    if (t.done) t.done(now);
  }
}

}  // namespace kvaccel::sim
