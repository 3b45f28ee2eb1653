#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kvaccel/config.h"
#include "kvaccel/device/bulk_scan.h"
#include "kvaccel/device/dev_lsm.h"
#include "kvaccel/device/media.h"
#include "kvaccel/device/pages.h"
#include "kvaccel/sim/simulator.h"

namespace kvaccel::device {

enum class Opcode : uint8_t {
  kBlockRead,
  kBlockWrite,
  kKvPut,
  kKvGet,
  kKvSeek,
  kKvNext,
  kKvRangeScan,
  kKvReset,
};

enum class DeviceStatus : uint8_t {
  kOk,
  kNotFound,
  kExhausted,
  kRegionFault,
  kOutOfRange,
  kDeviceFull,
  kInvalid,
};

std::string_view to_string(Opcode op);
std::string_view to_string(DeviceStatus s);

struct DeviceCommand {
  Opcode opcode = Opcode::kKvGet;
  uint64_t lba = 0;              // block ops
  uint64_t n_pages = 0;          // block ops
  std::vector<uint8_t> data;     // block write payload
  Entry entry;                   // kv-put
  std::string key;               // kv-get, kv-seek, scan start
  std::optional<std::string> end_key;  // scan end (inclusive); none = unbounded
  uint64_t iterator = 0;         // kv-seek, kv-next

  uint64_t payload_size() const;
};

struct Completion {
  DeviceStatus status = DeviceStatus::kOk;
  sim::SimTime done_at = 0;
  std::vector<uint8_t> data;
  std::optional<Entry> entry;
  std::vector<Chunk> chunks;
};

// Result of a bulk scan before delivery: the chunks plus the device-side cost
// of producing them. Delivering chunk i costs chunks[i].bytes.size() on the
// kv device-to-host channel.
struct ScanResult {
  std::vector<Chunk> chunks;
  sim::IoCost scan;
  uint64_t records = 0;
};

// Simulated dual-interface SSD. Every command takes an optional `batch`:
// when given, the command's resource demand is added to it and the caller
// decides when to run it; when null, it is charged to the simulator right
// away and Completion::done_at reports when it finishes.
class HybridDevice {
 public:
  HybridDevice(const DeviceOptions& opts, sim::Simulator& sim);
  ~HybridDevice();
  HybridDevice(const HybridDevice&) = delete;
  HybridDevice& operator=(const HybridDevice&) = delete;

  const AddressSpace& space() const { return space_; }
  const DeviceOptions& options() const { return opts_; }

  Completion submit(const DeviceCommand& cmd, sim::IoCost* batch = nullptr);

  DeviceStatus block_read(uint64_t lba, uint64_t n_pages, std::vector<uint8_t>* out,
                          sim::IoCost* batch = nullptr);
  DeviceStatus block_write(uint64_t lba, uint64_t n_pages, std::span<const uint8_t> data,
                           sim::IoCost* batch = nullptr);

  DeviceStatus kv_put(const Entry& e, sim::IoCost* batch = nullptr);
  // kNotFound when absent. A tombstone is returned as an entry.
  DeviceStatus kv_get(std::string_view key, std::optional<Entry>* out, sim::IoCost* batch = nullptr);

  uint64_t kv_open_iterator();
  void kv_close_iterator(uint64_t it);
  DeviceStatus kv_seek(uint64_t it, std::string_view start, std::optional<Entry>* out,
                       sim::IoCost* batch = nullptr);
  DeviceStatus kv_next(uint64_t it, std::optional<Entry>* out, sim::IoCost* batch = nullptr);

  // Entries in [start, end], latest version per key, tombstones included.
  ScanResult scan_bulk(std::string_view start, const std::optional<std::string>& end);
  // scan_bulk plus delivery of all chunks.
  std::vector<Chunk> kv_range_scan_bulk(std::string_view start,
                                        const std::optional<std::string>& end,
                                        sim::IoCost* batch = nullptr);
  DeviceStatus kv_reset(sim::IoCost* batch = nullptr);

  // Host view of the block region for SST reads; charges block d2h bytes.
  PageSource& block_source();

  DevLsm& dev_lsm() { return *dev_; }
  const DevLsm& dev_lsm() const { return *dev_; }
  const PageAllocator& kv_allocator() const { return kv_alloc_; }
  const MediaStore& media() const { return media_; }
  sim::Simulator& simulator() { return sim_; }

  // Charges `cost` now; returns its completion time.
  sim::SimTime charge(const sim::IoCost& cost);

  // Image file: see README.md for the layout.
  void dump_image(const std::filesystem::path& path) const;
  void load_image(const std::filesystem::path& path);

 private:
  class BlockSource;
  class InternalSource;
  struct OpenIterator;

  void finish(const sim::IoCost& cost, sim::IoCost* batch, sim::SimTime* done);
  DeviceStatus check_block(uint64_t lba, uint64_t n) const;

  DeviceOptions opts_;
  sim::Simulator& sim_;
  AddressSpace space_;
  MediaStore media_;
  PageAllocator kv_alloc_;
  std::unique_ptr<BlockSource> block_src_;
  std::unique_ptr<InternalSource> internal_src_;
  std::unique_ptr<DevLsm> dev_;
  std::map<uint64_t, std::unique_ptr<OpenIterator>> iterators_;
  uint64_t next_iterator_ = 1;
  sim::SimTime last_done_ = 0;
};

}  // namespace kvaccel::device
