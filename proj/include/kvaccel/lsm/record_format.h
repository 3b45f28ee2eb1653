#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kvaccel/lsm/entry.h"

namespace kvaccel {

// Record layout shared by SST images and the bulk-scan wire format. All
// integers little-endian:
//
//   key_len   u16
//   key       key_len bytes
//   seq       u64
//   flags     u8   bit0 = tombstone, bit1 = continuation (wire format only)
//   value_len u32
//   value     value_len bytes
namespace record {

constexpr size_t kFixedBytes = 2 + 8 + 1 + 4;
constexpr uint8_t kFlagTombstone = 0x1;
constexpr uint8_t kFlagContinuation = 0x2;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline size_t encoded_size(size_t key_len, size_t value_len) {
  return kFixedBytes + key_len + value_len;
}
inline size_t encoded_size(const Entry& e) { return encoded_size(e.key.size(), e.value.size()); }

void put_u16(std::vector<uint8_t>& out, uint16_t v);
void put_u32(std::vector<uint8_t>& out, uint32_t v);
void put_u64(std::vector<uint8_t>& out, uint64_t v);
uint16_t get_u16(const uint8_t* p);
uint32_t get_u32(const uint8_t* p);
uint64_t get_u64(const uint8_t* p);

void append(std::vector<uint8_t>& out, std::string_view key, uint64_t seq, uint8_t flags,
            std::string_view value);
inline void append(std::vector<uint8_t>& out, const Entry& e) {
  append(out, e.key, e.seq, e.tombstone ? kFlagTombstone : 0, e.value);
}

struct View {
  std::string_view key;
  uint64_t seq;
  uint8_t flags;
  std::string_view value;
  size_t size;  // encoded bytes consumed

  bool tombstone() const { return flags & kFlagTombstone; }
  bool continuation() const { return flags & kFlagContinuation; }
  Entry to_entry() const {
    return Entry{std::string(key), std::string(value), seq, tombstone()};
  }
};

// Parses one record at the start of `in`. Throws FormatError if truncated.
View parse(std::span<const uint8_t> in);

}  // namespace record
}  // namespace kvaccel
