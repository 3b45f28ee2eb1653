#include "kvaccel/accel/metadata_table.h"

#include <algorithm>

namespace kvaccel {

void MetadataTable::insert(std::string_view key, uint64_t seq) {
  ++counters_.inserts;
  auto it = map_.find(key);
  if (it == map_.end()) {
    map_.emplace(std::string(key), seq);
  } else {
    it->second = seq;
  }
}

bool MetadataTable::contains(std::string_view key) const {
  ++counters_.checks;
  return map_.find(key) != map_.end();
}

std::optional<uint64_t> MetadataTable::seq_of(std::string_view key) const {
  ++counters_.checks;
  auto it = map_.find(key);
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

bool MetadataTable::erase(std::string_view key) {
  auto it = map_.find(key);
  if (it == map_.end()) return false;
  ++counters_.deletes;
  map_.erase(it);
  return true;
}

std::vector<std::string> MetadataTable::sorted_keys() const {
  std::vector<std::string> keys;
  keys.reserve(map_.size());
  for (const auto& [k, s] : map_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace kvaccel
