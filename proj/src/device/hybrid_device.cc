#include "kvaccel/device/hybrid_device.h"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace kvaccel::device {

using sim::Channel;
using sim::IoCost;

std::string_view to_string(Opcode op) {
  switch (op) {
    case Opcode::kBlockRead: return "block-read";
    case Opcode::kBlockWrite: return "block-write";
    case Opcode::kKvPut: return "kv-put";
    case Opcode::kKvGet: return "kv-get";
    case Opcode::kKvSeek: return "kv-seek";
    case Opcode::kKvNext: return "kv-next";
    case Opcode::kKvRangeScan: return "kv-range-scan";
    case Opcode::kKvReset: return "kv-reset";
  }
  return "?";
}

std::string_view to_string(DeviceStatus s) {
  switch (s) {
    case DeviceStatus::kOk: return "ok";
    case DeviceStatus::kNotFound: return "not-found";
    case DeviceStatus::kExhausted: return "exhausted";
    case DeviceStatus::kRegionFault: return "region-fault";
    case DeviceStatus::kOutOfRange: return "out-of-range";
    case DeviceStatus::kDeviceFull: return "device-full";
    case DeviceStatus::kInvalid: return "invalid";
  }
  return "?";
}

uint64_t DeviceCommand::payload_size() const {
  switch (opcode) {
    case Opcode::kBlockWrite: return data.size();
    case Opcode::kKvPut: return record::encoded_size(entry);
    default: return 0;
  }
}

class HybridDevice::BlockSource final : public PageSource {
 public:
  explicit BlockSource(HybridDevice& dev) : dev_(dev) {}
  uint32_t page_size() const override { return dev_.space_.page_size; }
  void read_pages(uint64_t lba, uint64_t n, uint8_t* out, IoCost* cost) override {
    if (!dev_.space_.in_block_region(lba, n)) throw std::out_of_range("block read outside block region");
    dev_.media_.read(lba, n, out);
    if (cost) {
      cost->add(Channel::kBlockD2H, n * page_size());
    } else {
      dev_.sim_.charge_transfer(sim::Interface::kBlock, sim::Direction::kDeviceToHost, n * page_size());
    }
  }

 private:
  HybridDevice& dev_;
};

class HybridDevice::InternalSource final : public PageSource {
 public:
  explicit InternalSource(HybridDevice& dev) : dev_(dev) {}
  uint32_t page_size() const override { return dev_.space_.page_size; }
  void read_pages(uint64_t lba, uint64_t n, uint8_t* out, IoCost* cost) override {
    if (!dev_.space_.in_kv_region(lba, n)) throw std::out_of_range("internal read outside kv region");
    dev_.media_.read(lba, n, out);
    if (cost) cost->add(Channel::kInternal, n * page_size());
  }

 private:
  HybridDevice& dev_;
};

struct HybridDevice::OpenIterator {
  IoCost scratch;
  std::unique_ptr<EntryIterator> it;
  uint64_t opened_at = 0;
  bool positioned = false;
};

HybridDevice::HybridDevice(const DeviceOptions& opts, sim::Simulator& sim)
    : opts_(opts),
      sim_(sim),
      space_{opts.total_pages, opts.page_size, opts.dp()},
      media_(opts.total_pages, opts.page_size),
      kv_alloc_(space_.dp, space_.kv_pages()),
      block_src_(std::make_unique<BlockSource>(*this)),
      internal_src_(std::make_unique<InternalSource>(*this)),
      dev_(std::make_unique<DevLsm>(opts_, media_, kv_alloc_, *internal_src_)) {}

HybridDevice::~HybridDevice() = default;

PageSource& HybridDevice::block_source() { return *block_src_; }

sim::SimTime HybridDevice::charge(const IoCost& cost) {
  sim::SimTime done = sim_.now();
  if (cost.device_busy_us > 0) done = sim_.device_core().reserve(sim_.now(), cost.device_busy_us);
  for (size_t c = 0; c < sim::kNumChannels; ++c) {
    if (cost.bytes[c] == 0) continue;
    auto id = sim_.transfers().start(static_cast<Channel>(c), cost.bytes[c], {});
    done = std::max(done, sim_.transfers().projected_completion(id));
  }
  return done;
}

void HybridDevice::finish(const IoCost& cost, IoCost* batch, sim::SimTime* done) {
  if (batch) {
    *batch += cost;
    if (done) *done = sim_.now();
  } else {
    sim::SimTime t = charge(cost);
    if (done) *done = t;
  }
}

// Background device work (flush, compaction) runs beside the command; it
// only competes for media bandwidth.
static void charge_background(sim::Simulator& sim, const IoCost& bg) {
  uint64_t b = bg.get(Channel::kInternal);
  if (b > 0) sim.charge_internal(b);
}

DeviceStatus HybridDevice::check_block(uint64_t lba, uint64_t n) const {
  if (n == 0) return DeviceStatus::kInvalid;
  if (lba >= space_.total_pages || n > space_.total_pages - lba) return DeviceStatus::kOutOfRange;
  if (!space_.in_block_region(lba, n)) return DeviceStatus::kRegionFault;
  return DeviceStatus::kOk;
}

DeviceStatus HybridDevice::block_read(uint64_t lba, uint64_t n_pages, std::vector<uint8_t>* out,
                                      IoCost* batch) {
  DeviceStatus st = check_block(lba, n_pages);
  if (st != DeviceStatus::kOk) return st;
  out->resize(n_pages * space_.page_size);
  media_.read(lba, n_pages, out->data());
  IoCost c;
  c.add(Channel::kBlockD2H, out->size());
  finish(c, batch, &last_done_);
  return DeviceStatus::kOk;
}

DeviceStatus HybridDevice::block_write(uint64_t lba, uint64_t n_pages,
                                       std::span<const uint8_t> data, IoCost* batch) {
  DeviceStatus st = check_block(lba, n_pages);
  if (st != DeviceStatus::kOk) return st;
  const uint64_t len = n_pages * space_.page_size;
  if (data.size() > len) return DeviceStatus::kInvalid;
  if (data.size() == len) {
    media_.write(lba, data);
  } else {
    std::vector<uint8_t> buf(len, 0);
    std::memcpy(buf.data(), data.data(), data.size());
    media_.write(lba, buf);
  }
  IoCost c;
  c.add(Channel::kBlockH2D, len);
  finish(c, batch, &last_done_);
  return DeviceStatus::kOk;
}

DeviceStatus HybridDevice::kv_put(const Entry& e, IoCost* batch) {
  if (e.key.empty()) return DeviceStatus::kInvalid;
  IoCost bg;
  if (!dev_->put(e, &bg)) return DeviceStatus::kDeviceFull;
  IoCost c;
  c.add(Channel::kKvH2D, record::encoded_size(e));
  c.device_busy_us = opts_.kv_cmd_overhead_us;
  c.device_commands = 1;
  finish(c, batch, &last_done_);
  charge_background(sim_, bg);
  return DeviceStatus::kOk;
}

DeviceStatus HybridDevice::kv_get(std::string_view key, std::optional<Entry>* out, IoCost* batch) {
  IoCost c;
  c.device_busy_us = opts_.kv_cmd_overhead_us;
  c.device_commands = 1;
  *out = dev_->get(key, &c);
  if (*out) c.add(Channel::kKvD2H, record::encoded_size(**out));
  finish(c, batch, &last_done_);
  return *out ? DeviceStatus::kOk : DeviceStatus::kNotFound;
}

uint64_t HybridDevice::kv_open_iterator() {
  auto oi = std::make_unique<OpenIterator>();
  oi->it = dev_->new_iterator(&oi->scratch);
  oi->opened_at = dev_->mutations();
  uint64_t id = next_iterator_++;
  iterators_.emplace(id, std::move(oi));
  return id;
}

void HybridDevice::kv_close_iterator(uint64_t it) { iterators_.erase(it); }

DeviceStatus HybridDevice::kv_seek(uint64_t it, std::string_view start, std::optional<Entry>* out,
                                   IoCost* batch) {
  auto found = iterators_.find(it);
  if (found == iterators_.end()) return DeviceStatus::kInvalid;
  OpenIterator& oi = *found->second;
  if (oi.opened_at != dev_->mutations()) {
    // Re-open over the current state; seek has no position to preserve.
    oi.it = dev_->new_iterator(&oi.scratch);
    oi.opened_at = dev_->mutations();
  }
  oi.scratch = IoCost{};
  oi.it->seek(start);
  oi.positioned = true;
  out->reset();
  if (oi.it->valid()) *out = oi.it->entry();
  IoCost c = oi.scratch;
  c.device_busy_us += opts_.kv_cmd_overhead_us;
  c.device_commands += 1;
  if (*out) c.add(Channel::kKvD2H, record::encoded_size(**out));
  finish(c, batch, &last_done_);
  return *out ? DeviceStatus::kOk : DeviceStatus::kExhausted;
}

DeviceStatus HybridDevice::kv_next(uint64_t it, std::optional<Entry>* out, IoCost* batch) {
  auto found = iterators_.find(it);
  if (found == iterators_.end()) return DeviceStatus::kInvalid;
  OpenIterator& oi = *found->second;
  if (!oi.positioned || oi.opened_at != dev_->mutations()) return DeviceStatus::kInvalid;
  out->reset();
  if (!oi.it->valid()) return DeviceStatus::kExhausted;
  oi.scratch = IoCost{};
  oi.it->next();
  if (oi.it->valid()) *out = oi.it->entry();
  IoCost c = oi.scratch;
  c.device_busy_us += opts_.kv_cmd_overhead_us;
  c.device_commands += 1;
  if (*out) c.add(Channel::kKvD2H, record::encoded_size(**out));
  finish(c, batch, &last_done_);
  return *out ? DeviceStatus::kOk : DeviceStatus::kExhausted;
}

ScanResult HybridDevice::scan_bulk(std::string_view start, const std::optional<std::string>& end) {
  ScanResult r;
  r.scan.device_busy_us = opts_.kv_cmd_overhead_us;
  r.scan.device_commands = 1;
  if (end && *end < start) return r;
  auto it = dev_->new_iterator(&r.scan);
  ChunkWriter w;
  for (it->seek(start); it->valid(); it->next()) {
    if (end && *end < it->key()) break;
    w.add(it->entry());
    ++r.records;
  }
  r.chunks = w.finish();
  return r;
}

std::vector<Chunk> HybridDevice::kv_range_scan_bulk(std::string_view start,
                                                    const std::optional<std::string>& end,
                                                    IoCost* batch) {
  ScanResult r = scan_bulk(start, end);
  IoCost c = r.scan;
  for (const auto& ch : r.chunks) c.add(Channel::kKvD2H, ch.bytes.size());
  finish(c, batch, &last_done_);
  return std::move(r.chunks);
}

DeviceStatus HybridDevice::kv_reset(IoCost* batch) {
  dev_->reset();
  iterators_.clear();
  IoCost c;
  c.device_busy_us = opts_.kv_cmd_overhead_us;
  c.device_commands = 1;
  finish(c, batch, &last_done_);
  return DeviceStatus::kOk;
}

Completion HybridDevice::submit(const DeviceCommand& cmd, IoCost* batch) {
  Completion out;
  switch (cmd.opcode) {
    case Opcode::kBlockRead:
      out.status = block_read(cmd.lba, cmd.n_pages, &out.data, batch);
      break;
    case Opcode::kBlockWrite:
      out.status = block_write(cmd.lba, cmd.n_pages, cmd.data, batch);
      break;
    case Opcode::kKvPut:
      out.status = kv_put(cmd.entry, batch);
      break;
    case Opcode::kKvGet:
      out.status = kv_get(cmd.key, &out.entry, batch);
      break;
    case Opcode::kKvSeek:
      out.status = kv_seek(cmd.iterator, cmd.key, &out.entry, batch);
      break;
    case Opcode::kKvNext:
      out.status = kv_next(cmd.iterator, &out.entry, batch);
      break;
    case Opcode::kKvRangeScan:
      out.chunks = kv_range_scan_bulk(cmd.key, cmd.end_key, batch);
      break;
    case Opcode::kKvReset:
      out.status = kv_reset(batch);
      break;
  }
  out.done_at = out.status == DeviceStatus::kOk || out.status == DeviceStatus::kNotFound ||
                        out.status == DeviceStatus::kExhausted
                    ? last_done_
                    : sim_.now();
  return out;
}

// Image layout (little-endian):
//   "KVADEVIM" u32 version=1 u32 page_size u64 total_pages u64 dp
//   u64 n, n x (u64 start, u64 count)          kv-region free extents
//   u32 n, n x (u32 tier, u32 m, m x extent)   Dev-LSM runs, newest first
//   u64 next_run_id
//   u8 has_min [u16 len, bytes]  u8 has_max [u16 len, bytes]
//   u64 n, n records                           Dev-LSM memtable
//   u64 n, n x (u64 lba, page bytes)           every written page
namespace {

constexpr char kImageMagic[8] = {'K', 'V', 'A', 'D', 'E', 'V', 'I', 'M'};
constexpr uint32_t kImageVersion = 1;

void put_key(std::vector<uint8_t>& out, const std::optional<std::string>& k) {
  out.push_back(k ? 1 : 0);
  if (!k) return;
  record::put_u16(out, static_cast<uint16_t>(k->size()));
  out.insert(out.end(), k->begin(), k->end());
}

class Reader {
 public:
  explicit Reader(std::vector<uint8_t> bytes) : b_(std::move(bytes)) {}
  const uint8_t* take(size_t n) {
    if (pos_ + n > b_.size()) throw record::FormatError("truncated device image");
    const uint8_t* p = b_.data() + pos_;
    pos_ += n;
    return p;
  }
  uint8_t u8() { return *take(1); }
  uint16_t u16() { return record::get_u16(take(2)); }
  uint32_t u32() { return record::get_u32(take(4)); }
  uint64_t u64() { return record::get_u64(take(8)); }
  std::optional<std::string> key() {
    if (u8() == 0) return std::nullopt;
    uint16_t n = u16();
    const uint8_t* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  Entry record() {
    auto v = record::parse(std::span<const uint8_t>(b_).subspan(pos_));
    pos_ += v.size;
    return v.to_entry();
  }

 private:
  std::vector<uint8_t> b_;
  size_t pos_ = 0;
};

}  // namespace

void HybridDevice::dump_image(const std::filesystem::path& path) const {
  std::vector<uint8_t> out(kImageMagic, kImageMagic + 8);
  record::put_u32(out, kImageVersion);
  record::put_u32(out, space_.page_size);
  record::put_u64(out, space_.total_pages);
  record::put_u64(out, space_.dp);
  auto free_list = kv_alloc_.free_extents();
  record::put_u64(out, free_list.size());
  for (const auto& e : free_list) {
    record::put_u64(out, e.start);
    record::put_u64(out, e.count);
  }
  record::put_u32(out, static_cast<uint32_t>(dev_->runs().size()));
  for (const auto& r : dev_->runs()) {
    record::put_u32(out, r.tier);
    record::put_u32(out, static_cast<uint32_t>(r.table->extents().size()));
    for (const auto& e : r.table->extents()) {
      record::put_u64(out, e.start);
      record::put_u64(out, e.count);
    }
  }
  record::put_u64(out, dev_->next_run_id());
  put_key(out, dev_->min_key());
  put_key(out, dev_->max_key());
  record::put_u64(out, dev_->memtable().size());
  for (const auto& [k, e] : dev_->memtable()) record::append(out, e);
  std::vector<uint64_t> written;
  for (uint64_t lba = 0; lba < space_.total_pages; ++lba) {
    if (media_.written(lba)) written.push_back(lba);
  }
  record::put_u64(out, written.size());
  std::vector<uint8_t> page(space_.page_size);
  for (uint64_t lba : written) {
    record::put_u64(out, lba);
    media_.read(lba, 1, page.data());
    out.insert(out.end(), page.begin(), page.end());
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write device image " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

void HybridDevice::load_image(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read device image " + path.string());
  Reader r(std::vector<uint8_t>(std::istreambuf_iterator<char>(f), {}));
  if (std::memcmp(r.take(8), kImageMagic, 8) != 0) throw record::FormatError("not a device image");
  if (r.u32() != kImageVersion) throw record::FormatError("unsupported device image version");
  if (r.u32() != space_.page_size || r.u64() != space_.total_pages || r.u64() != space_.dp) {
    throw record::FormatError("device image geometry mismatch");
  }
  std::vector<Extent> free_list(r.u64());
  for (auto& e : free_list) e = Extent{r.u64(), r.u64()};
  std::vector<std::pair<uint32_t, std::vector<Extent>>> runs(r.u32());
  for (auto& [tier, ext] : runs) {
    tier = r.u32();
    ext.resize(r.u32());
    for (auto& e : ext) e = Extent{r.u64(), r.u64()};
  }
  uint64_t next_run = r.u64();
  auto lo = r.key();
  auto hi = r.key();
  std::vector<Entry> mem(r.u64());
  for (auto& e : mem) e = r.record();
  uint64_t pages = r.u64();
  media_.discard_range(0, space_.total_pages);
  for (uint64_t i = 0; i < pages; ++i) {
    uint64_t lba = r.u64();
    media_.write(lba, std::span<const uint8_t>(r.take(space_.page_size), space_.page_size));
  }
  kv_alloc_.restore(free_list);
  iterators_.clear();
  dev_->restore(std::move(mem), std::move(runs), next_run, std::move(lo), std::move(hi));
}

}  // namespace kvaccel::device
