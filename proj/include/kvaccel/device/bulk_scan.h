#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kvaccel/lsm/entry.h"
#include "kvaccel/lsm/record_format.h"

namespace kvaccel::device {

// Bulk range-scan stream: records (record_format.h) packed into chunks of at
// most kChunkBytes. A record never straddles two chunks unless it alone is
// larger than a chunk; then it is cut into fragments that each fill one
// chunk, every fragment but the last carrying the continuation flag. Each
// fragment repeats key and seq; value_len is the fragment's share.
inline constexpr size_t kChunkBytes = 512 * 1024;

struct Chunk {
  uint32_t index = 0;
  uint32_t records = 0;  // record headers in this chunk, fragments included
  std::vector<uint8_t> bytes;
};

class ChunkWriter {
 public:
  explicit ChunkWriter(size_t chunk_bytes = kChunkBytes) : limit_(chunk_bytes) {}

  void add(const Entry& e);
  // Flushes the open chunk and returns everything produced so far.
  std::vector<Chunk> finish();
  size_t chunk_bytes() const { return limit_; }

 private:
  void close();

  size_t limit_;
  std::vector<Chunk> done_;
  Chunk open_;
};

// Reassembles entries from consecutive chunks. Throws record::FormatError on
// malformed input or a dangling continuation.
std::vector<Entry> parse_chunks(std::span<const Chunk> chunks);

// Chunks needed for n records of equal encoded size (<= chunk size).
uint64_t predicted_chunks(uint64_t n_records, uint64_t record_bytes,
                          uint64_t chunk_bytes = kChunkBytes);

}  // namespace kvaccel::device
