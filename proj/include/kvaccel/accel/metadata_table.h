#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kvaccel {

// Keys whose latest version lives in the device LSM, with that version's seq.
// Absent keys are served by the host LSM.
class MetadataTable {
 public:
  struct Counters {
    uint64_t inserts = 0;
    uint64_t checks = 0;
    uint64_t deletes = 0;
  };

  void insert(std::string_view key, uint64_t seq);
  bool contains(std::string_view key) const;
  std::optional<uint64_t> seq_of(std::string_view key) const;
  bool erase(std::string_view key);
  void clear() { map_.clear(); }

  size_t size() const { return map_.size(); }
  bool empty() const { return map_.empty(); }
  std::vector<std::string> sorted_keys() const;
  const Counters& counters() const { return counters_; }

 private:
  struct Hash {
    using is_transparent = void;
    size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };
  std::unordered_map<std::string, uint64_t, Hash, std::equal_to<>> map_;
  mutable Counters counters_;
};

}  // namespace kvaccel
