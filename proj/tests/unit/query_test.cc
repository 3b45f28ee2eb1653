#include <gtest/gtest.h>

#include <map>
#include <random>

#include "kvaccel/query/dual_iterator.h"
#include "store_rig.h"

namespace kvaccel {
namespace {

using testing::force_stall;
using testing::key_of;
using testing::small_config;
using testing::unstall;

struct Emitted {
  std::string key;
  Route side;
};

std::vector<Emitted> scan(AccelStore& s, std::string_view start, std::string_view stop) {
  std::vector<Emitted> out;
  DualIterator it(s);
  for (it.seek(start); it.valid() && it.key() < stop; it.next()) out.push_back({it.key(), it.source()});
  return out;
}

std::string keys(const std::vector<Emitted>& v) {
  std::string s;
  for (auto& e : v) s += e.key + (e.side == Route::kDev ? "D " : "M ");
  return s;
}

TEST(DualIterator, BothEmpty) {
  AccelStore s(small_config());
  DualIterator it(s);
  it.seek("");
  EXPECT_FALSE(it.valid());
  EXPECT_TRUE(s.range("", 10).empty());
}

TEST(DualIterator, InterleavesSides) {
  AccelStore s(small_config());
  s.put("a", "1");
  s.put("c", "3");
  uint32_t f = 0;
  force_stall(s, f);
  ASSERT_EQ(s.put("b", "2").route, Route::kDev);
  EXPECT_EQ(keys(scan(s, "a", "e")), "aM bD cM ");
  EXPECT_EQ(keys(scan(s, "bb", "e")), "cM ");
}

TEST(DualIterator, FullScanAcrossSides) {
  AccelStore s(small_config());
  s.put("a", "1");
  s.put("b", "2");
  s.put("e", "5");
  uint32_t f = 0;
  force_stall(s, f);
  s.put("c", "3");
  s.put("d", "4");
  DualIterator it(s);
  std::vector<KeyValue> got = it.range("a", 4);
  std::vector<KeyValue> want{{"a", "1"}, {"b", "2"}, {"c", "3"}, {"d", "4"}, {"e", "5"}};
  EXPECT_EQ(got, want);
  EXPECT_EQ(it.switches(), 2u);
}

TEST(DualIterator, DuplicateKeyFollowsMetadata) {
  AccelStore s(small_config());
  s.put("k", "host-old");
  uint32_t f = 0;
  force_stall(s, f);
  s.put("k", "dev");
  auto r = s.range("k", 0);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].value, "dev");
  unstall(s);
  s.put("k", "host-new");
  ASSERT_FALSE(s.device().dev_lsm().empty());
  auto all = scan(s, "k", "l");
  ASSERT_EQ(all.size(), 1u);
  EXPECT_EQ(all[0].side, Route::kMain);
  EXPECT_EQ(s.range("k", 0)[0].value, "host-new");
}

TEST(DualIterator, DeviceTombstoneShadowsHost) {
  AccelStore s(small_config());
  s.put("a", "1");
  s.put("b", "2");
  uint32_t f = 0;
  force_stall(s, f);
  s.del("a");
  EXPECT_EQ(keys(scan(s, "", "e")), "bM ");
}

TEST(DualIterator, OneSideOnly) {
  AccelStore s(small_config());
  for (int i = 0; i < 50; ++i) s.put(key_of(i), "v");
  auto r = s.range(key_of(10), 5);
  ASSERT_EQ(r.size(), 6u);
  EXPECT_EQ(r.front().key, key_of(10));
  EXPECT_EQ(r.back().key, key_of(15));
  EXPECT_EQ(s.range(key_of(10), 0).size(), 1u);
}

TEST(DualIterator, SeekPlus1024Next) {
  AccelStore s(small_config());
  uint32_t f = 0;
  for (int i = 0; i < 1500; ++i) {
    if (i == 700) force_stall(s, f);
    s.put(key_of(i), std::to_string(i));
  }
  auto r = s.range(key_of(0), 1024);
  ASSERT_EQ(r.size(), 1025u);
  for (size_t i = 0; i < r.size(); ++i) EXPECT_EQ(r[i].key, key_of(static_cast<uint32_t>(i)));
}

TEST(DualIterator, InvalidatedByWrites) {
  AccelStore s(small_config());
  s.put("a", "1");
  s.put("b", "1");
  DualIterator it(s);
  it.seek("a");
  s.put("c", "1");
  EXPECT_THROW(it.next(), std::logic_error);
}

TEST(DualIterator, ChargesHostAndDeviceSteps) {
  AccelStore s(small_config());
  s.put("a", "1");
  uint32_t f = 0;
  force_stall(s, f);
  s.put("b", "2");
  sim::IoCost cost;
  // Seek on both sides, then one kv_next once "b" has been consumed.
  s.range("a", 2, &cost);
  EXPECT_EQ(cost.host_cpu_us, 3 * s.config().host.next_us);
  EXPECT_EQ(cost.device_commands, 2u);
}

// Random split of a keyspace across both LSMs, compared with the oracle's
// first n+1 entries at or after start.
TEST(DualIterator, RandomSplitsMatchOracle) {
  int trials = 0;
  for (uint64_t seed = 1; trials < 1000; ++seed) {
    std::mt19937_64 rng(seed);
    AccelStore s(small_config());
    std::map<std::string, std::string> oracle;
    uint32_t f = 0;
    const uint32_t space = 50 + rng() % 400;
    const int writes = static_cast<int>(rng() % 600);
    for (int i = 0; i < writes; ++i) {
      if (rng() % 40 == 0) force_stall(s, f);
      if (rng() % 60 == 0) unstall(s);
      std::string k = key_of(static_cast<uint32_t>(rng() % space));
      if (rng() % 8 == 0) {
        s.del(k);
        oracle.erase(k);
      } else {
        std::string v = std::to_string(rng());
        s.put(k, v);
        oracle[k] = v;
      }
    }
    for (auto it = oracle.begin(); it != oracle.end();) {
      it = it->first[0] == 'f' ? oracle.erase(it) : std::next(it);
    }
    for (int q = 0; q < 10 && trials < 1000; ++q, ++trials) {
      std::string start = key_of(static_cast<uint32_t>(rng() % (space + 10)));
      size_t n = rng() % 64;
      DualIterator it(s);
      std::vector<KeyValue> got;
      it.seek(start);
      for (size_t i = 0; it.valid() && it.key()[0] != 'f'; ++i) {
        got.push_back({it.key(), it.value()});
        if (i == n) break;
        it.next();
      }
      std::vector<KeyValue> want;
      for (auto o = oracle.lower_bound(start); o != oracle.end() && want.size() <= n; ++o) {
        want.push_back({o->first, o->second});
      }
      ASSERT_EQ(got, want) << "seed " << seed << " start " << start << " n " << n;
      EXPECT_LE(it.switches(), it.emitted() + 1);
    }
  }
}

}  // namespace
}  // namespace kvaccel
