#include "kvaccel/sim/event_loop.h"

#include <limits>
#include <string>

namespace kvaccel::sim {

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::kOpArrival:
      return "op-arrival";
    case EventKind::kFlushComplete:
      return "flush-complete";
    case EventKind::kCompactionComplete:
      return "compaction-complete";
    case EventKind::kTransferComplete:
      return "transfer-complete";
    case EventKind::kDetectorTick:
      return "detector-tick";
    case EventKind::kRollbackStep:
      return "rollback-step";
    case EventKind::kCpuPhaseComplete:
      return "cpu-phase-complete";
    case EventKind::kDeviceWork:
      return "device-work";
  }
  return "?";
}

EventId EventLoop::schedule(SimTime fire_time, EventKind kind, Handler handler) {
  if (fire_time < now_) {
    throw std::invalid_argument("event scheduled in the past: " + std::to_string(fire_time) +
                                " < " + std::to_string(now_));
  }
  EventId id = next_id_++;
  queue_.push({fire_time, id});
  handlers_.emplace(id, Slot{kind, std::move(handler)});
  return id;
}

bool EventLoop::cancel(EventId id) { return handlers_.erase(id) > 0; }

void EventLoop::skip_cancelled() const {
  while (!queue_.empty() && !handlers_.contains(queue_.top().id)) queue_.pop();
}

SimTime EventLoop::next_event_time() const {
  skip_cancelled();
  return queue_.empty() ? std::numeric_limits<SimTime>::max() : queue_.top().time;
}

FiredEvent EventLoop::fire_top() {
  Pending top = queue_.top();
  queue_.pop();
  auto it = handlers_.find(top.id);
  Slot slot = std::move(it->second);
  handlers_.erase(it);
  now_ = top.time;
  FiredEvent fired{top.time, top.id, slot.kind};
  if (logging_) log_.push_back(fired);
  if (slot.handler) slot.handler();
  return fired;
}

std::vector<FiredEvent> EventLoop::advance_until(SimTime deadline) {
  if (deadline < now_) {
    throw std::invalid_argument("advance_until deadline precedes now");
  }
  std::vector<FiredEvent> fired;
  for (;;) {
    skip_cancelled();
    if (queue_.empty() || queue_.top().time > deadline) break;
    fired.push_back(fire_top());
  }
  now_ = deadline;
  return fired;
}

bool EventLoop::step() {
  skip_cancelled();
  if (queue_.empty()) return false;
  fire_top();
  return true;
}

bool EventLoop::run_while_not(const std::function<bool()>& pred, SimTime limit) {
  while (!pred()) {
    skip_cancelled();
    if (queue_.empty() || queue_.top().time > limit) return pred();
    fire_top();
  }
  return true;
}

}  // namespace kvaccel::sim
