#include "kvaccel/lsm/record_format.h"

#include <limits>

namespace kvaccel::record {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint16_t get_u16(const uint8_t* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

uint32_t get_u32(const uint8_t* p) {
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

uint64_t get_u64(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void append(std::vector<uint8_t>& out, std::string_view key, uint64_t seq, uint8_t flags,
            std::string_view value) {
  if (key.size() > std::numeric_limits<uint16_t>::max()) throw FormatError("key too long");
  if (value.size() > std::numeric_limits<uint32_t>::max()) throw FormatError("value too long");
  put_u16(out, static_cast<uint16_t>(key.size()));
  out.insert(out.end(), key.begin(), key.end());
  put_u64(out, seq);
  out.push_back(flags);
  put_u32(out, static_cast<uint32_t>(value.size()));
  out.insert(out.end(), value.begin(), value.end());
}

View parse(std::span<const uint8_t> in) {
  if (in.size() < 2) throw FormatError("truncated record header");
  size_t key_len = get_u16(in.data());
  size_t pos = 2;
  if (in.size() < pos + key_len + 8 + 1 + 4) throw FormatError("truncated record");
  std::string_view key(reinterpret_cast<const char*>(in.data() + pos), key_len);
  pos += key_len;
  uint64_t seq = get_u64(in.data() + pos);
  pos += 8;
  uint8_t flags = in[pos++];
  size_t value_len = get_u32(in.data() + pos);
  pos += 4;
  if (in.size() < pos + value_len) throw FormatError("truncated record value");
  std::string_view value(reinterpret_cast<const char*>(in.data() + pos), value_len);
  pos += value_len;
  return View{key, seq, flags, value, pos};
}

}  // namespace kvaccel::record
