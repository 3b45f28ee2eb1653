#pragma once

#include <cstdint>
#include <string>

namespace kvaccel {

// A versioned key-value pair. Higher seq shadows lower seq for equal keys.
// Keys compare as unsigned byte strings (std::string's ordering).
struct Entry {
  std::string key;
  std::string value;
  uint64_t seq = 0;
  bool tombstone = false;

  bool operator==(const Entry&) const = default;
};

// Bytes an entry occupies in a memtable: payload plus fixed bookkeeping.
inline uint64_t memtable_charge(const Entry& e, uint32_t overhead) {
  return e.key.size() + e.value.size() + overhead;
}

}  // namespace kvaccel
