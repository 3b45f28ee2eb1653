#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kvaccel::sim {

// Simulated time in microseconds.
using SimTime = int64_t;
using EventId = uint64_t;

constexpr SimTime kMicrosPerSecond = 1'000'000;

enum class EventKind : uint8_t {
  kOpArrival,
  kFlushComplete,
  kCompactionComplete,
  kTransferComplete,
  kDetectorTick,
  kRollbackStep,
  kCpuPhaseComplete,
  kDeviceWork,
};

std::string_view to_string(EventKind k);

struct FiredEvent {
  SimTime time;
  EventId id;
  EventKind kind;

  bool operator==(const FiredEvent&) const = default;
};

// Deterministic virtual clock plus pending-event queue. Events with equal
// fire times run in scheduling order. Handlers may schedule further events,
// including at the current time.
class EventLoop {
 public:
  using Handler = std::function<void()>;

  SimTime now() const { return now_; }

  // Throws std::invalid_argument if fire_time < now().
  EventId schedule(SimTime fire_time, EventKind kind, Handler handler);
  EventId schedule_after(SimTime delay, EventKind kind, Handler handler) {
    return schedule(now_ + delay, kind, std::move(handler));
  }
  // Returns false if the event already fired or was cancelled.
  bool cancel(EventId id);

  // Fires every event with fire_time <= deadline, then sets now() = deadline.
  std::vector<FiredEvent> advance_until(SimTime deadline);

  // Fires the earliest pending event. Returns false when the queue is empty.
  bool step();

  // Fires events until pred() holds or the next event lies beyond limit.
  // Returns pred(). The clock stops at the last fired event.
  bool run_while_not(const std::function<bool()>& pred, SimTime limit);

  bool empty() const { return handlers_.empty(); }
  size_t pending() const { return handlers_.size(); }
  SimTime next_event_time() const;

  // Full history of fired events, used for replay comparisons.
  const std::vector<FiredEvent>& log() const { return log_; }
  void set_logging(bool on) { logging_ = on; }

 private:
  struct Pending {
    SimTime time;
    EventId id;
    bool operator>(const Pending& o) const {
      return time != o.time ? time > o.time : id > o.id;
    }
  };
  struct Slot {
    EventKind kind;
    Handler handler;
  };

  void skip_cancelled() const;
  FiredEvent fire_top();

  SimTime now_ = 0;
  EventId next_id_ = 1;
  mutable std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue_;
  std::unordered_map<EventId, Slot> handlers_;
  std::vector<FiredEvent> log_;
  bool logging_ = true;
};

}  // namespace kvaccel::sim
