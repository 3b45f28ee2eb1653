#include <gtest/gtest.h>

#include <map>
#include <random>

#include "kvaccel/lsm/main_lsm.h"

namespace kvaccel {
namespace {

std::string key_of(uint32_t k) {
  std::string s(4, '\0');
  for (int i = 0; i < 4; ++i) s[i] = static_cast<char>((k >> (24 - 8 * i)) & 0xff);
  return s;
}

struct LsmRig {
  explicit LsmRig(LsmOptions lo = small(), bool slowdown = false)
      : sim(sim_opts()), dev(dev_opts(), sim), lsm(lo, slowdown, sim, dev) {}

  static SimOptions sim_opts() {
    SimOptions s;
    s.device_capacity = 100'000'000;
    return s;
  }
  static DeviceOptions dev_opts() {
    DeviceOptions d;
    d.total_pages = 16384;  // 64 MiB
    return d;
  }
  static LsmOptions small() {
    LsmOptions o;
    o.memtable_bytes = 16 * 1024;
    o.level1_bytes = 64 * 1024;
    o.sst_target_bytes = 16 * 1024;
    o.l0_slowdown = 100;
    o.l0_stop = 200;
    o.max_immutable = 100;
    o.pending_soft_bytes = 1ull << 40;
    o.pending_hard_bytes = 1ull << 40;
    return o;
  }

  void quiesce() {
    lsm.force_flush();
    for (int i = 0; i < 10'000 && !lsm.background_idle(); ++i) {
      sim.loop().advance_until(sim.now() + 100'000);
    }
    ASSERT_TRUE(lsm.background_idle());
  }

  sim::Simulator sim;
  device::HybridDevice dev;
  MainLsm lsm;
};

TEST(MainLsm, EmptyStore) {
  LsmRig r;
  EXPECT_FALSE(r.lsm.get_local("x", nullptr));
  StallStatus s = r.lsm.stall_status();
  EXPECT_EQ(s.verdict, Verdict::kNormal);
  EXPECT_EQ(s.l0_count, 0u);
  EXPECT_EQ(s.imm_count, 0u);
  EXPECT_EQ(s.pending_compaction_bytes, 0u);
}

TEST(MainLsm, MemtableChargeAndRotation) {
  LsmOptions o = LsmRig::small();
  Entry e{"k1", "value", 1, false};
  o.memtable_bytes = 2 * memtable_charge(e, o.entry_overhead);
  LsmRig r(o);
  ASSERT_FALSE(r.lsm.put_local(e).blocked);
  EXPECT_EQ(r.lsm.active().bytes, 2 + 5 + o.entry_overhead);
  r.lsm.put_local({"k2", "value", 2, false});
  EXPECT_EQ(r.lsm.immutable_count(), 0u);
  r.lsm.put_local({"k3", "value", 3, false});
  EXPECT_EQ(r.lsm.immutable_count(), 1u);
  r.sim.loop().advance_until(1'000'000);
  EXPECT_EQ(r.lsm.level_files(0), 1u);
  EXPECT_EQ(r.lsm.level(0)[0]->entry_count(), 2u);
  EXPECT_EQ(r.lsm.immutable_count(), 0u);
}

TEST(MainLsm, ShadowingAndTombstones) {
  LsmRig r;
  r.lsm.put_local({"k", "v1", 1, false});
  r.lsm.put_local({"k", "v2", 2, false});
  EXPECT_EQ(r.lsm.get_local("k", nullptr)->value, "v2");
  r.lsm.put_local({"k", "", 3, true});
  EXPECT_FALSE(r.lsm.get_local("k", nullptr));
}

TEST(MainLsm, L0StopBlocksWithoutSlowdown) {
  LsmOptions o = LsmRig::small();
  o.l0_compaction_trigger = 100;
  o.l0_slowdown = 2;
  o.l0_stop = 3;
  LsmRig r(o);
  uint64_t seq = 0;
  while (r.lsm.stall_status().l0_count < 2) {
    r.lsm.put_local({key_of(static_cast<uint32_t>(++seq)), std::string(1000, 'x'), seq, false});
    r.sim.loop().advance_until(r.sim.now() + 10'000);
  }
  EXPECT_EQ(r.lsm.stall_status().verdict, Verdict::kSlowdown);
  // Baseline without slowdown: slowdown verdict costs nothing.
  EXPECT_EQ(r.lsm.put_local({"a", "b", ++seq, false}).delay_us, 0);
  while (r.lsm.stall_status().l0_count < 3) {
    auto out = r.lsm.put_local({key_of(static_cast<uint32_t>(++seq)), std::string(1000, 'x'), seq, false});
    ASSERT_FALSE(out.blocked);
    r.sim.loop().advance_until(r.sim.now() + 10'000);
  }
  StallStatus s = r.lsm.stall_status();
  EXPECT_EQ(s.verdict, Verdict::kStall);
  EXPECT_EQ(s.reason, StallReason::kL0Stop);
  auto out = r.lsm.put_local({"z", "z", ++seq, false});
  EXPECT_TRUE(out.blocked);
  EXPECT_EQ(out.reason, StallReason::kL0Stop);
  EXPECT_EQ(r.lsm.counters().blocked[static_cast<size_t>(StallReason::kL0Stop)], 1u);
}

TEST(MainLsm, SlowdownPolicyDelaysWrites) {
  LsmOptions o = LsmRig::small();
  o.l0_compaction_trigger = 100;
  o.l0_slowdown = 1;
  o.l0_stop = 50;
  LsmRig r(o, /*slowdown=*/true);
  r.lsm.put_local({"a", std::string(20'000, 'x'), 1, false});
  r.lsm.force_flush();
  r.sim.loop().advance_until(1'000'000);
  ASSERT_EQ(r.lsm.stall_status().verdict, Verdict::kSlowdown);
  auto out = r.lsm.put_local({"b", "v", 2, false});
  EXPECT_FALSE(out.blocked);
  EXPECT_EQ(out.delay_us, o.slowdown_sleep_us);
}

TEST(MainLsm, FlushBacklogStall) {
  LsmOptions o = LsmRig::small();
  o.max_immutable = 1;
  LsmRig r(o);
  r.lsm.put_local({"a", std::string(20'000, 'x'), 1, false});
  r.lsm.put_local({"b", "v", 2, false});  // rotates the oversized memtable
  ASSERT_EQ(r.lsm.immutable_count(), 1u);
  auto out = r.lsm.put_local({"c", "v", 3, false});
  EXPECT_TRUE(out.blocked);
  EXPECT_EQ(out.reason, StallReason::kFlushBacklog);
}

TEST(MainLsm, PendingBytesStall) {
  LsmOptions o = LsmRig::small();
  o.l0_compaction_trigger = 1;
  o.pending_soft_bytes = 1;
  o.pending_hard_bytes = 10'000;
  LsmRig r(o);
  r.lsm.put_local({"a", std::string(20'000, 'x'), 1, false});
  r.lsm.force_flush();
  r.sim.loop().run_while_not([&] { return r.lsm.level_files(0) == 1; }, 10'000'000);
  StallStatus s = r.lsm.stall_status();
  EXPECT_GE(s.pending_compaction_bytes, 10'000u);
  EXPECT_EQ(s.reason, StallReason::kPendingBytes);
}

TEST(MainLsm, OverlappingL0FilesBothRetained) {
  LsmOptions o = LsmRig::small();
  o.l0_compaction_trigger = 100;
  LsmRig r(o);
  r.lsm.put_local({"a", "1", 1, false});
  r.lsm.put_local({"m", "1", 2, false});
  r.lsm.force_flush();
  r.sim.loop().advance_until(1'000'000);
  r.lsm.put_local({"c", "2", 3, false});
  r.lsm.put_local({"m", "2", 4, false});
  r.lsm.force_flush();
  r.sim.loop().advance_until(2'000'000);
  ASSERT_EQ(r.lsm.level_files(0), 2u);
  EXPECT_TRUE(r.lsm.level(0)[0]->overlaps(r.lsm.level(0)[1]->min_key(), r.lsm.level(0)[1]->max_key()));
  EXPECT_EQ(r.lsm.get_local("m", nullptr)->value, "2");
}

TEST(MainLsm, CompactionMergesAndLedgerMatchesSstSizes) {
  LsmOptions o = LsmRig::small();
  o.l0_compaction_trigger = 2;
  LsmRig r(o);
  r.lsm.put_local({"k1", "a", 1, false});
  r.lsm.put_local({"k3", "a", 2, false});
  r.lsm.force_flush();
  r.sim.loop().advance_until(1'000'000);
  r.lsm.put_local({"k2", "b", 3, false});
  r.lsm.put_local({"k3", "b", 4, false});
  r.lsm.put_local({"k4", "b", 5, false});
  r.lsm.force_flush();
  r.sim.loop().advance_until(3'000'000);
  ASSERT_EQ(r.lsm.level_files(0), 0u);
  ASSERT_EQ(r.lsm.level_files(1), 1u);
  auto l1 = r.lsm.level(1)[0];
  EXPECT_EQ(l1->entry_count(), 4u);
  EXPECT_EQ(r.lsm.get_local("k3", nullptr)->value, "b");
  // Audit: compaction reads its inputs and writes its outputs, page-rounded.
  const uint64_t page = 4096;
  auto pages = [&](uint64_t b) { return (b + page - 1) / page * page; };
  const auto& c = r.lsm.counters();
  EXPECT_EQ(c.compactions, 1u);
  EXPECT_EQ(c.compaction_bytes_written, pages(l1->byte_size()));
  EXPECT_EQ(r.sim.ledger().total_bytes(sim::Channel::kBlockD2H), c.compaction_bytes_read);
  EXPECT_EQ(r.sim.ledger().total_bytes(sim::Channel::kBlockH2D),
            c.flush_bytes + c.compaction_bytes_written);
  r.lsm.check_invariants();
}

TEST(MainLsm, BottomLevelDropsTombstones) {
  LsmOptions o = LsmRig::small();
  o.l0_compaction_trigger = 1;
  LsmRig r(o);
  r.lsm.put_local({"a", "1", 1, false});
  r.lsm.put_local({"b", "", 2, true});
  r.quiesce();
  ASSERT_EQ(r.lsm.level_files(1), 1u);
  EXPECT_EQ(r.lsm.level(1)[0]->entry_count(), 1u);
}

TEST(MainLsm, RandomOpsMatchOracle) {
  LsmRig r;
  std::mt19937_64 rng(11);
  std::map<std::string, std::string> oracle;
  uint64_t seq = 0;
  for (int i = 0; i < 6000; ++i) {
    std::string k = key_of(static_cast<uint32_t>(rng() % 800));
    int op = static_cast<int>(rng() % 10);
    if (op < 6) {
      std::string v(50 + rng() % 300, static_cast<char>('a' + rng() % 26));
      ASSERT_FALSE(r.lsm.put_local({k, v, ++seq, false}).blocked);
      oracle[k] = v;
    } else if (op < 8) {
      ASSERT_FALSE(r.lsm.put_local({k, "", ++seq, true}).blocked);
      oracle.erase(k);
    } else {
      auto got = r.lsm.get_local(k, nullptr);
      auto want = oracle.find(k);
      ASSERT_EQ(got.has_value(), want != oracle.end()) << i;
      if (got) ASSERT_EQ(got->value, want->second);
    }
    if (i % 50 == 0) r.sim.loop().advance_until(r.sim.now() + 20'000);
  }
  r.quiesce();
  r.lsm.check_invariants();
  EXPECT_GT(r.lsm.counters().compactions, 3u);
  EXPECT_GT(r.lsm.level_files(2), 0u);
  std::map<std::string, std::string> seen;
  auto it = r.lsm.new_iterator(nullptr);
  for (it->seek(""); it->valid(); it->next()) {
    if (!it->tombstone()) seen[it->key()] = it->value();
  }
  EXPECT_EQ(seen, oracle);
  for (const auto& [k, v] : oracle) EXPECT_EQ(r.lsm.get_local(k, nullptr)->value, v);
}

TEST(MainLsm, MultipleWorkersKeepLevelsDisjoint) {
  LsmOptions o = LsmRig::small();
  o.compaction_workers = 4;
  o.level1_bytes = 32 * 1024;
  LsmRig r(o);
  std::mt19937_64 rng(5);
  for (uint64_t seq = 1; seq <= 8000; ++seq) {
    r.lsm.put_local({key_of(static_cast<uint32_t>(rng() % 3000)), std::string(200, 'v'), seq, false});
    if (seq % 20 == 0) {
      r.sim.loop().advance_until(r.sim.now() + 5'000);
      r.lsm.check_invariants();
    }
  }
  r.quiesce();
  r.lsm.check_invariants();
}

}  // namespace
}  // namespace kvaccel
