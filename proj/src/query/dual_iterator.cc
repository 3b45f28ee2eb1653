#include "kvaccel/query/dual_iterator.h"

#include <stdexcept>

namespace kvaccel {

using device::DeviceStatus;

DualIterator::DualIterator(AccelStore& store, sim::IoCost* cost)
    : store_(store), cost_(cost ? cost : &own_cost_), mutations_at_open_(store.mutations()) {
  main_ = store_.lsm().new_iterator(cost_);
  if (!store_.device().dev_lsm().empty()) {
    dev_active_ = true;
    dev_handle_ = store_.device().kv_open_iterator();
  }
}

DualIterator::~DualIterator() {
  if (dev_active_) store_.device().kv_close_iterator(dev_handle_);
  if (cost_ == &own_cost_ && !own_cost_.empty()) store_.sim().execute(own_cost_, [] {});
}

void DualIterator::check_unchanged() const {
  if (store_.mutations() != mutations_at_open_) {
    throw std::logic_error("store modified while a range cursor is open");
  }
}

void DualIterator::advance_main() {
  main_->next();
}

void DualIterator::advance_dev() {
  auto st = store_.device().kv_next(dev_handle_, &dev_cur_, cost_);
  if (st != DeviceStatus::kOk) dev_cur_.reset();
}

void DualIterator::seek(std::string_view target) {
  check_unchanged();
  cost_->host_cpu_us += store_.config().host.next_us;
  main_->seek(target);
  dev_cur_.reset();
  if (dev_active_) {
    auto st = store_.device().kv_seek(dev_handle_, target, &dev_cur_, cost_);
    if (st != DeviceStatus::kOk) dev_cur_.reset();
  }
  consume_main_ = consume_dev_ = false;
  settle();
}

void DualIterator::next() {
  check_unchanged();
  if (!valid()) throw std::logic_error("next on an exhausted cursor");
  cost_->host_cpu_us += store_.config().host.next_us;
  if (consume_main_) advance_main();
  if (consume_dev_) advance_dev();
  consume_main_ = consume_dev_ = false;
  settle();
}

void DualIterator::settle() {
  current_.reset();
  while (true) {
    const bool has_main = main_->valid();
    const bool has_dev = dev_cur_.has_value();
    if (!has_main && !has_dev) return;

    bool take_main = false;
    bool take_dev = false;
    Route side;
    if (has_main && has_dev) {
      int c = main_->key().compare(dev_cur_->key);
      if (c < 0) {
        take_main = true;
      } else if (c > 0) {
        take_dev = true;
      } else {
        take_main = take_dev = true;
      }
    } else {
      take_main = has_main;
      take_dev = has_dev;
    }
    if (take_main && take_dev) {
      side = store_.metadata().contains(dev_cur_->key) ? Route::kDev : Route::kMain;
    } else {
      side = take_dev ? Route::kDev : Route::kMain;
    }

    bool tomb = side == Route::kDev ? dev_cur_->tombstone : main_->tombstone();
    if (tomb) {
      if (take_main) advance_main();
      if (take_dev) advance_dev();
      continue;
    }
    if (side == Route::kDev) {
      current_ = KeyValue{dev_cur_->key, dev_cur_->value};
    } else {
      current_ = KeyValue{main_->key(), main_->value()};
    }
    current_side_ = side;
    consume_main_ = take_main;
    consume_dev_ = take_dev;
    if (last_side_ && *last_side_ != side) ++switches_;
    last_side_ = side;
    ++emitted_;
    return;
  }
}

std::vector<KeyValue> DualIterator::range(std::string_view start, size_t n) {
  std::vector<KeyValue> out;
  seek(start);
  for (size_t i = 0;; ++i) {
    if (!valid()) break;
    out.push_back(*current_);
    if (i == n) break;
    next();
  }
  return out;
}

}  // namespace kvaccel
