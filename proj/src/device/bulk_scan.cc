#include "kvaccel/device/bulk_scan.h"

#include <algorithm>
#include <stdexcept>

namespace kvaccel::device {

void ChunkWriter::close() {
  if (open_.bytes.empty()) return;
  open_.index = static_cast<uint32_t>(done_.size());
  done_.push_back(std::move(open_));
  open_ = Chunk{};
}

void ChunkWriter::add(const Entry& e) {
  const uint8_t tomb = e.tombstone ? record::kFlagTombstone : 0;
  const size_t size = record::encoded_size(e);
  if (size <= limit_) {
    if (open_.bytes.size() + size > limit_) close();
    record::append(open_.bytes, e.key, e.seq, tomb, e.value);
    ++open_.records;
    return;
  }
  const size_t header = record::encoded_size(e.key.size(), 0);
  if (header >= limit_) throw std::invalid_argument("key too large for chunk");
  close();
  const size_t piece = limit_ - header;
  std::string_view rest = e.value;
  while (rest.size() > piece) {
    record::append(open_.bytes, e.key, e.seq, tomb | record::kFlagContinuation,
                   rest.substr(0, piece));
    ++open_.records;
    close();
    rest.remove_prefix(piece);
  }
  record::append(open_.bytes, e.key, e.seq, tomb, rest);
  ++open_.records;
}

std::vector<Chunk> ChunkWriter::finish() {
  close();
  return std::move(done_);
}

std::vector<Entry> parse_chunks(std::span<const Chunk> chunks) {
  std::vector<Entry> out;
  bool pending = false;
  Entry partial;
  for (const Chunk& c : chunks) {
    std::span<const uint8_t> in(c.bytes);
    uint32_t seen = 0;
    while (!in.empty()) {
      auto v = record::parse(in);
      in = in.subspan(v.size);
      ++seen;
      if (pending) {
        if (v.key != partial.key || v.seq != partial.seq) {
          throw record::FormatError("continuation fragment mismatch");
        }
        partial.value.append(v.value);
      } else {
        partial = Entry{std::string(v.key), std::string(v.value), v.seq, v.tombstone()};
      }
      pending = v.continuation();
      if (!pending) out.push_back(std::move(partial));
    }
    if (seen != c.records) throw record::FormatError("chunk record count mismatch");
  }
  if (pending) throw record::FormatError("dangling continuation");
  return out;
}

uint64_t predicted_chunks(uint64_t n_records, uint64_t record_bytes, uint64_t chunk_bytes) {
  if (n_records == 0) return 0;
  uint64_t per = chunk_bytes / record_bytes;
  return (n_records + per - 1) / per;
}

}  // namespace kvaccel::device
