#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <random>

#include "kvaccel/device/bulk_scan.h"
#include "kvaccel/device/hybrid_device.h"

namespace kvaccel::device {
namespace {

using sim::Channel;

struct Rig {
  explicit Rig(DeviceOptions d = small()) : sim(SimOptions{}), dev(d, sim) {}
  static DeviceOptions small() {
    DeviceOptions d;
    d.total_pages = 4096;  // 16 MiB
    return d;
  }
  sim::Simulator sim;
  HybridDevice dev;
};

std::string key_of(uint32_t k) {
  std::string s(4, '\0');
  for (int i = 0; i < 4; ++i) s[i] = static_cast<char>((k >> (24 - 8 * i)) & 0xff);
  return s;
}

TEST(Pages, AllocatorFirstFitAndCoalesce) {
  PageAllocator a(100, 10);
  auto x = a.allocate(4);
  auto y = a.allocate(4);
  ASSERT_TRUE(x && y);
  EXPECT_EQ((*x)[0], (Extent{100, 4}));
  EXPECT_EQ((*y)[0], (Extent{104, 4}));
  EXPECT_FALSE(a.allocate(3));
  a.release(*x);
  auto z = a.allocate(6);  // gathers 100..103 and 108..109
  ASSERT_TRUE(z);
  EXPECT_EQ(total_pages(*z), 6u);
  EXPECT_EQ(a.free_pages(), 0u);
  a.release(*y);
  a.release(*z);
  EXPECT_EQ(a.free_extents(), (std::vector<Extent>{{100, 10}}));
  EXPECT_THROW(a.release(*y), std::logic_error);
}

TEST(Device, BlockWriteChargesBlockChannel) {
  Rig r;
  std::vector<uint8_t> page(4096, 0xab);
  EXPECT_EQ(r.dev.block_write(0, 1, page), DeviceStatus::kOk);
  r.sim.loop().advance_until(sim::kMicrosPerSecond);
  EXPECT_EQ(r.sim.ledger().total_bytes(Channel::kBlockH2D), 4096u);
}

TEST(Device, BlockRoundTripAndZeroFill) {
  Rig r;
  std::vector<uint8_t> data(3 * 4096);
  for (size_t i = 0; i < data.size(); ++i) data[i] = static_cast<uint8_t>(i * 7);
  ASSERT_EQ(r.dev.block_write(10, 3, data), DeviceStatus::kOk);
  std::vector<uint8_t> back;
  ASSERT_EQ(r.dev.block_read(10, 3, &back), DeviceStatus::kOk);
  EXPECT_EQ(back, data);
  ASSERT_EQ(r.dev.block_read(500, 1, &back), DeviceStatus::kOk);
  EXPECT_EQ(back, std::vector<uint8_t>(4096, 0));
}

TEST(Device, RegionFaults) {
  Rig r;
  const uint64_t dp = r.dev.space().dp;
  EXPECT_EQ(dp, 3072u);
  EXPECT_EQ(r.dev.space().block_capacity_bytes(), 3072u * 4096);
  std::vector<uint8_t> page(4096);
  std::vector<uint8_t> out;
  EXPECT_EQ(r.dev.block_write(dp, 1, page), DeviceStatus::kRegionFault);
  EXPECT_EQ(r.dev.block_read(dp - 1, 2, &out), DeviceStatus::kRegionFault);
  EXPECT_EQ(r.dev.block_read(4096, 1, &out), DeviceStatus::kOutOfRange);
  DeviceCommand cmd;
  cmd.opcode = Opcode::kBlockWrite;
  cmd.lba = dp + 5;
  cmd.n_pages = 1;
  cmd.data = page;
  EXPECT_EQ(r.dev.submit(cmd).status, DeviceStatus::kRegionFault);
}

TEST(Device, KvPutGetAndOverwrite) {
  Rig r;
  std::optional<Entry> got;
  EXPECT_EQ(r.dev.kv_get("absent", &got), DeviceStatus::kNotFound);
  ASSERT_EQ(r.dev.kv_put({"k", "v1", 1, false}), DeviceStatus::kOk);
  ASSERT_EQ(r.dev.kv_put({"k", "v2", 2, false}), DeviceStatus::kOk);
  ASSERT_EQ(r.dev.kv_get("k", &got), DeviceStatus::kOk);
  EXPECT_EQ(got->value, "v2");
  EXPECT_EQ(r.dev.kv_put({"", "x", 3, false}), DeviceStatus::kInvalid);
}

TEST(Device, KvPutSharesBandwidthWithBlockTraffic) {
  SimOptions so;
  so.device_capacity = 1'000'000;
  sim::Simulator sim(so);
  DeviceOptions d = Rig::small();
  d.kv_cmd_overhead_us = 0;
  HybridDevice dev(d, sim);
  std::vector<uint8_t> data(250 * 4096, 1);  // 1,024,000 bytes
  sim::IoCost block;
  ASSERT_EQ(dev.block_write(0, 250, data, &block), DeviceStatus::kOk);
  sim::SimTime block_done = dev.charge(block);
  EXPECT_EQ(block_done, 1'024'000);
  Entry e{"key", std::string(100'000 - record::encoded_size(3, 0), 'x'), 1, false};
  sim::IoCost kv;
  ASSERT_EQ(dev.kv_put(e, &kv), DeviceStatus::kOk);
  EXPECT_EQ(kv.get(Channel::kKvH2D), 100'000u);
  sim::SimTime kv_done = dev.charge(kv);
  // Both run at 0.5 MB/s, so the 100 kB put lands after 0.2 s.
  EXPECT_EQ(kv_done, 200'000);
  sim.loop().advance_until(3'000'000);
  EXPECT_EQ(sim.ledger().total_bytes(Channel::kBlockH2D), 1'024'000u);
}

TEST(Device, DevLsmMatchesOracle) {
  DeviceOptions d = Rig::small();
  d.dev_memtable_bytes = 8 * 1024;
  Rig r(d);
  std::mt19937_64 rng(3);
  std::map<std::string, Entry> oracle;
  for (uint64_t seq = 1; seq <= 1000; ++seq) {
    Entry e{key_of(static_cast<uint32_t>(rng() % 300)), std::string(rng() % 200, 'a' + seq % 26), seq,
            rng() % 10 == 0};
    if (e.tombstone) e.value.clear();
    ASSERT_EQ(r.dev.kv_put(e), DeviceStatus::kOk);
    oracle[e.key] = e;
  }
  EXPECT_GT(r.dev.dev_lsm().flushes(), 0u);
  EXPECT_GT(r.dev.dev_lsm().compactions(), 0u);
  for (const auto& [k, e] : oracle) {
    std::optional<Entry> got;
    ASSERT_EQ(r.dev.kv_get(k, &got), DeviceStatus::kOk);
    EXPECT_EQ(*got, e);
  }
  // Full iteration.
  uint64_t it = r.dev.kv_open_iterator();
  std::optional<Entry> cur;
  std::vector<Entry> seen;
  for (auto st = r.dev.kv_seek(it, "", &cur); st == DeviceStatus::kOk; st = r.dev.kv_next(it, &cur)) {
    seen.push_back(*cur);
  }
  std::vector<Entry> want;
  for (const auto& [k, e] : oracle) want.push_back(e);
  EXPECT_EQ(seen, want);
  // Bulk scan over everything.
  auto chunks = r.dev.kv_range_scan_bulk("", std::nullopt);
  EXPECT_EQ(parse_chunks(chunks), want);
}

TEST(Device, ProbesAllRunsNewestFirstWithoutCompaction) {
  DeviceOptions d = Rig::small();
  d.dev_memtable_bytes = 1;  // every put becomes a run
  d.dev_compaction = false;
  Rig r(d);
  for (uint32_t i = 0; i < 6; ++i) ASSERT_EQ(r.dev.kv_put({key_of(i), "v", i + 1, false}), DeviceStatus::kOk);
  EXPECT_EQ(r.dev.dev_lsm().runs().size(), 6u);
  std::optional<Entry> got;
  sim::IoCost c;
  ASSERT_EQ(r.dev.kv_get(key_of(0), &got, &c), DeviceStatus::kOk);
  EXPECT_EQ(c.sst_probes, 6u);
  sim::IoCost c2;
  ASSERT_EQ(r.dev.kv_get(key_of(5), &got, &c2), DeviceStatus::kOk);
  EXPECT_EQ(c2.sst_probes, 1u);
}

TEST(Device, SeekLowerBound) {
  Rig r;
  uint64_t it = r.dev.kv_open_iterator();
  std::optional<Entry> cur;
  EXPECT_EQ(r.dev.kv_seek(it, "", &cur), DeviceStatus::kExhausted);
  r.dev.kv_put({"a", "1", 1, false});
  r.dev.kv_put({"c", "3", 2, false});
  it = r.dev.kv_open_iterator();
  ASSERT_EQ(r.dev.kv_seek(it, "b", &cur), DeviceStatus::kOk);
  EXPECT_EQ(cur->key, "c");
  EXPECT_EQ(r.dev.kv_next(it, &cur), DeviceStatus::kExhausted);
}

TEST(Device, CapacityLimitSignalsFull) {
  DeviceOptions d = Rig::small();
  d.dev_capacity_bytes = 64 * 4096;
  d.dev_memtable_bytes = 16 * 1024;
  Rig r(d);
  uint64_t seq = 0;
  DeviceStatus st = DeviceStatus::kOk;
  while (st == DeviceStatus::kOk && seq < 10'000) {
    ++seq;
    st = r.dev.kv_put({key_of(static_cast<uint32_t>(seq)), std::string(1000, 'z'), seq, false});
  }
  EXPECT_EQ(st, DeviceStatus::kDeviceFull);
  EXPECT_LE(r.dev.dev_lsm().used_pages(), 64u);
  EXPECT_EQ(r.dev.kv_put({key_of(1), std::string(1000, 'z'), seq + 1, false}), DeviceStatus::kDeviceFull);
}

TEST(Device, ResetFreesEverything) {
  DeviceOptions d = Rig::small();
  d.dev_memtable_bytes = 4096;
  Rig r(d);
  EXPECT_EQ(r.dev.kv_reset(), DeviceStatus::kOk);
  for (uint32_t i = 0; i < 10'000; ++i) {
    ASSERT_EQ(r.dev.kv_put({key_of(i), "val", i + 1, false}), DeviceStatus::kOk);
  }
  EXPECT_GT(r.dev.dev_lsm().used_pages(), 0u);
  r.dev.kv_reset();
  EXPECT_EQ(r.dev.kv_allocator().free_pages(), r.dev.space().kv_pages());
  EXPECT_TRUE(r.dev.dev_lsm().empty());
  EXPECT_FALSE(r.dev.dev_lsm().min_key());
  std::optional<Entry> got;
  EXPECT_EQ(r.dev.kv_get(key_of(5), &got), DeviceStatus::kNotFound);
  r.dev.kv_put({key_of(1), "x", 20'000, false});
  auto all = parse_chunks(r.dev.kv_range_scan_bulk("", std::nullopt));
  ASSERT_EQ(all.size(), 1u);
  EXPECT_EQ(all[0].value, "x");
}

TEST(Device, ImageRoundTrip) {
  DeviceOptions d = Rig::small();
  d.dev_memtable_bytes = 4096;
  Rig a(d);
  std::vector<uint8_t> page(4096, 0x5a);
  a.dev.block_write(7, 1, page);
  for (uint32_t i = 0; i < 500; ++i) a.dev.kv_put({key_of(i * 3), std::string(40, 'q'), i + 1, i % 7 == 0});
  auto path = std::filesystem::temp_directory_path() / "kvaccel_device_image.bin";
  a.dev.dump_image(path);
  Rig b(d);
  b.dev.load_image(path);
  std::filesystem::remove(path);
  EXPECT_EQ(parse_chunks(b.dev.kv_range_scan_bulk("", std::nullopt)),
            parse_chunks(a.dev.kv_range_scan_bulk("", std::nullopt)));
  std::vector<uint8_t> back;
  b.dev.block_read(7, 1, &back);
  EXPECT_EQ(back, page);
  EXPECT_EQ(b.dev.kv_allocator().free_pages(), a.dev.kv_allocator().free_pages());
  EXPECT_EQ(b.dev.dev_lsm().min_key(), a.dev.dev_lsm().min_key());
}

TEST(Chunks, OneMebibyteOfFourKibRecords) {
  ChunkWriter w;
  const size_t n = (1 << 20) / 4096;
  for (uint32_t i = 0; i < n; ++i) w.add({key_of(i), std::string(4096, 'v'), i + 1, false});
  auto chunks = w.finish();
  // record = 15 + 4 + 4096 = 4115 bytes; floor(524288 / 4115) = 127 per chunk.
  ASSERT_EQ(chunks.size(), 3u);
  EXPECT_EQ(chunks[0].records, 127u);
  EXPECT_EQ(chunks[1].records, 127u);
  EXPECT_EQ(chunks[2].records, 2u);
  EXPECT_EQ(chunks[0].bytes.size(), 127u * 4115);
  EXPECT_EQ(predicted_chunks(n, 4115), 3u);
}

TEST(Chunks, EmptyRangeHasNoChunks) {
  ChunkWriter w;
  EXPECT_TRUE(w.finish().empty());
  Rig r;
  r.dev.kv_put({"m", "1", 1, false});
  EXPECT_TRUE(r.dev.kv_range_scan_bulk("n", std::string("z")).empty());
}

TEST(Chunks, OversizedRecordIsFragmented) {
  ChunkWriter w;
  w.add({"small", "x", 1, false});
  std::string big(1'500'000, '\0');
  for (size_t i = 0; i < big.size(); ++i) big[i] = static_cast<char>(i % 251);
  w.add({"big", big, 2, true});
  w.add({"tail", "y", 3, false});
  auto chunks = w.finish();
  for (const auto& c : chunks) EXPECT_LE(c.bytes.size(), kChunkBytes);
  auto back = parse_chunks(chunks);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[1].value, big);
  EXPECT_TRUE(back[1].tombstone);
  EXPECT_EQ(back[2].key, "tail");
}

}  // namespace
}  // namespace kvaccel::device
