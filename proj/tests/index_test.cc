#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "hail/error.h"
#include "hail/index.h"
#include "test_util.h"

namespace hail {
namespace {

using testing::MakeBlock;
using testing::MixedSchema;

Schema IntPayload() { return Schema({{"k", 1, AttrType::kInt32}, {"p", 2, AttrType::kVarchar}}); }

PaxBlock IntBlock(const std::vector<int32_t>& keys) {
  std::vector<Record> rows;
  for (size_t i = 0; i < keys.size(); ++i) rows.push_back(Record{{keys[i], "v" + std::to_string(i)}});
  return MakeBlock(IntPayload(), rows);
}

uint64_t Key(int32_t v) { return OrderedKey(Value(v)); }

// Smallest partition range a lookup that sees only the root can return:
// p qualifies when root[p] <= hi and the first key after it (the next root
// entry, or the block maximum) is >= lo.
std::optional<PartitionRange> RootOnlyOracle(const SparseClusteredIndex& idx, uint64_t lo, uint64_t hi) {
  std::optional<PartitionRange> r;
  for (uint64_t p = 0; p < idx.root.size(); ++p) {
    const uint64_t part_max = p + 1 < idx.root.size() ? idx.root[p + 1] : idx.max_key;
    if (idx.root[p] <= hi && part_max >= lo && lo <= hi) {
      if (!r) r = PartitionRange{p, p};
      r->last = p;
    }
  }
  return r;
}

TEST(SortBlock, SmallSort) {
  const Schema s({{"k", 1, AttrType::kInt32}, {"p", 2, AttrType::kVarchar}});
  const PaxBlock b = MakeBlock(s, {Record{{5, std::string("a")}}, Record{{1, std::string("b")}},
                                   Record{{3, std::string("c")}}});
  const SortedBlock sorted = SortBlock(b, 1);
  EXPECT_EQ(ReadColumn(sorted.block, 1), (std::vector<Value>{1, 3, 5}));
  EXPECT_EQ(ReadColumn(sorted.block, 2), (std::vector<Value>{std::string("b"), std::string("c"), std::string("a")}));
  EXPECT_EQ(sorted.perm, (std::vector<uint64_t>{1, 2, 0}));
}

TEST(SortBlock, SortedInputIsIdentity) {
  const SortedBlock sorted = SortBlock(IntBlock({1, 2, 2, 3, 9}), 1);
  EXPECT_EQ(sorted.perm, (std::vector<uint64_t>{0, 1, 2, 3, 4}));
}

TEST(SortBlock, VarcharKeyRejected) {
  try {
    SortBlock(IntBlock({1}), 2);
    FAIL();
  } catch (const HailError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnsupportedKeyType);
  }
}

TEST(SortBlock, MultisetAndStability) {
  std::mt19937_64 rng(1);
  const Schema s = MixedSchema();
  const auto rows = testing::RandomRecords(s, 10000, rng);
  for (int key : {1, 3, 4, 5, 6}) {
    const SortedBlock sorted = SortBlock(MakeBlock(s, rows), key);
    std::vector<std::string> before, after;
    for (const Record& r : rows) before.push_back(FormatRecord(r, s));
    for (uint64_t j = 0; j < sorted.block.row_count(); ++j) after.push_back(FormatRecord(sorted.block.GetRow(j), s));
    std::sort(before.begin(), before.end());
    std::sort(after.begin(), after.end());
    EXPECT_EQ(before, after);
    for (uint64_t j = 1; j < sorted.perm.size(); ++j) {
      const Value& a = rows[sorted.perm[j - 1]].values[key - 1];
      const Value& b = rows[sorted.perm[j]].values[key - 1];
      ASSERT_FALSE(b < a);
      if (a == b) EXPECT_LT(sorted.perm[j - 1], sorted.perm[j]);
      EXPECT_EQ(sorted.block.GetRow(j), rows[sorted.perm[j]]);
    }
  }
}

TEST(BuildIndex, RootLengths) {
  std::vector<int32_t> keys(1024);
  std::iota(keys.begin(), keys.end(), 0);
  EXPECT_EQ(BuildIndex(IntBlock(keys), 1, 1024).index.root.size(), 1u);
  keys.push_back(5000);
  const IndexSection s = BuildIndex(IntBlock(keys), 1, 1024);
  ASSERT_EQ(s.index.root.size(), 2u);
  EXPECT_EQ(s.index.root[1], Key(5000));
  EXPECT_EQ(s.index.max_key, Key(5000));
  EXPECT_EQ(BuildIndex(IntBlock({}), 1, 1024).index.root.size(), 0u);
}

TEST(BuildIndex, RejectsUnsortedInput) {
  try {
    BuildIndex(IntBlock({1, 3, 2}), 1, 2);
    FAIL();
  } catch (const HailError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotSorted);
  }
}

TEST(BuildIndex, SparsityBound) {
  std::mt19937_64 rng(2);
  const Schema s = MixedSchema();
  for (uint64_t rows : {0u, 1u, 99u, 100u, 101u, 2500u}) {
    for (uint64_t n : {1u, 7u, 100u}) {
      const PaxBlock b = SortAndIndex(MakeBlock(s, testing::RandomRecords(s, rows, rng)), 5, n);
      const uint64_t parts = (rows + n - 1) / n;
      EXPECT_EQ(b.index()->index.root.size(), parts);
      // Fixed header, two var-list descriptors, root keys, two offset lists.
      EXPECT_EQ(EncodeIndexSection(*b.index()).size(), 64 + 2 * 24 + parts * 4 + 2 * parts * 8);
    }
  }
}

TEST(IndexSizing, WorkedInstance) {
  // 6.7M 4-byte keys: ceil(6,700,000 / 1024) = 6543 root entries.
  const IndexSizing s = ComputeIndexSizing(6700000ull * 4, 4, 4, 1024);
  EXPECT_EQ(s.rows, 6700000u);
  EXPECT_EQ(s.root_entries, 6543u);
  const IndexSizing b = ComputeIndexSizing(256ull << 20, 40, 4, 1024);
  EXPECT_EQ(b.rows, 6710886u);
  EXPECT_EQ(b.root_entries, 6554u);
  EXPECT_EQ(b.root_bytes, 26216u);
  EXPECT_NEAR(b.ratio * 100, 0.0098, 0.0001);
}

// Proportionally scaled desk instance: real index bytes within 10% of the formula.
TEST(IndexSizing, DeskInstanceMatchesFormula) {
  std::mt19937_64 rng(3);
  std::vector<Attribute> attrs;
  for (int i = 1; i <= 10; ++i) attrs.push_back({"a" + std::to_string(i), i, AttrType::kInt32});
  const Schema s(attrs);
  const uint64_t rows = 100000;
  const PaxBlock b = SortAndIndex(MakeBlock(s, testing::RandomRecords(s, rows, rng, 1 << 20)), 1, 1024);
  const IndexSizing want = ComputeIndexSizing(rows * 40, 40, 4, 1024);
  const double actual = static_cast<double>(DescribeIndexSection(*b.index()).root_length) / (rows * 40);
  EXPECT_NEAR(actual, want.ratio, want.ratio * 0.1);
}

TEST(LookupRange, DistinctKeys) {
  std::vector<int32_t> keys(5000);
  std::iota(keys.begin(), keys.end(), 0);
  const SparseClusteredIndex idx = BuildIndex(IntBlock(keys), 1, 1024).index;
  // Only the root is consulted, and root[2] == 2048 == lo, so partition 1
  // might end in a run of 2048s; it stays in range.
  EXPECT_EQ(LookupRange(idx, Key(2048), Key(3071)), (PartitionRange{1, 2}));
  EXPECT_EQ(LookupRange(idx, Key(2049), Key(3071)), (PartitionRange{2, 2}));
  EXPECT_EQ(LookupRange(idx, Key(2049), Key(3072)), (PartitionRange{2, 3}));
  EXPECT_EQ(LookupRange(idx, Key(5000), Key(9000)), std::nullopt);
  EXPECT_EQ(LookupRange(idx, Key(-10), Key(-1)), std::nullopt);
  EXPECT_EQ(LookupRange(idx, Key(10), Key(9)), std::nullopt);
  EXPECT_EQ(LookupRange(idx, Key(-10), Key(0)), (PartitionRange{0, 0}));
  EXPECT_EQ(LookupRange(idx, Key(4999), Key(4999)), (PartitionRange{4, 4}));
}

TEST(LookupRange, DuplicatesSpanningPartitions) {
  // Partition size 4; value 7 fills rows 3..12, crossing three boundaries.
  std::vector<int32_t> keys = {1, 2, 3};
  keys.insert(keys.end(), 10, 7);
  keys.insert(keys.end(), {8, 9, 10});
  const SparseClusteredIndex idx = BuildIndex(IntBlock(keys), 1, 4).index;
  ASSERT_EQ(idx.root, (std::vector<uint64_t>{Key(1), Key(7), Key(7), Key(7)}));
  EXPECT_EQ(LookupRange(idx, Key(7), Key(7)), (PartitionRange{0, 3}));
  EXPECT_EQ(LookupRange(idx, Key(8), Key(8)), (PartitionRange{3, 3}));
}

TEST(LookupRange, MatchesRootOnlyOracle) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<int32_t> keys(rng() % 400);
    for (int32_t& k : keys) k = static_cast<int32_t>(rng() % 60) - 30;
    std::sort(keys.begin(), keys.end());
    const uint64_t n = 1 + rng() % 16;
    const SparseClusteredIndex idx = BuildIndex(IntBlock(keys), 1, n).index;
    for (int q = 0; q < 20; ++q) {
      int32_t lo = static_cast<int32_t>(rng() % 70) - 35, hi = static_cast<int32_t>(rng() % 70) - 35;
      if (q % 5 != 0 && lo > hi) std::swap(lo, hi);
      const auto got = LookupRange(idx, Key(lo), Key(hi));
      EXPECT_EQ(got, RootOnlyOracle(idx, Key(lo), Key(hi))) << "lo=" << lo << " hi=" << hi << " n=" << n;
      // Every partition holding a match lies in range.
      for (uint64_t r = 0; r < keys.size(); ++r) {
        if (keys[r] >= lo && keys[r] <= hi) {
          ASSERT_TRUE(got.has_value());
          EXPECT_GE(r / n, got->first);
          EXPECT_LE(r / n, got->last);
        }
      }
    }
  }
}

TEST(ReadPartitions, FullPointAndEmptyRanges) {
  std::vector<int32_t> keys(3000);
  for (size_t i = 0; i < keys.size(); ++i) keys[i] = static_cast<int32_t>(2 * i);
  const PaxBlock b = SortAndIndex(IntBlock(keys), 1, 100);
  const SparseClusteredIndex& idx = b.index()->index;
  PaxBlockSource src(b);
  auto scan = [&](int32_t lo, int32_t hi) {
    auto range = LookupRange(idx, Key(lo), Key(hi));
    return range ? ReadPartitions(src, idx, *range, Key(lo), Key(hi)).rows : std::vector<uint64_t>{};
  };
  std::vector<uint64_t> all(3000);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(scan(-100, 100000), all);
  EXPECT_EQ(scan(1234, 1234), (std::vector<uint64_t>{617}));
  EXPECT_TRUE(scan(1235, 1235).empty());
}

// Partitions [first, last] are one contiguous read of their key bytes.
TEST(ReadPartitions, ClusteredContiguity) {
  std::mt19937_64 rng(5);
  const Schema s = MixedSchema();
  const PaxBlock b = SortAndIndex(MakeBlock(s, testing::RandomRecords(s, 5000, rng, 1000)), 3, 128);
  const SparseClusteredIndex& idx = b.index()->index;
  for (int q = 0; q < 50; ++q) {
    const uint64_t first = rng() % idx.partition_count();
    const uint64_t last = first + rng() % (idx.partition_count() - first);
    PaxBlockSource src(b);
    ReadPartitions(src, idx, {first, last}, 0, UINT64_MAX);
    ASSERT_EQ(src.reads().size(), 1u);
    EXPECT_EQ(src.reads()[0].position, 3);
    EXPECT_EQ(src.reads()[0].offset, first * idx.leaf_byte_size());
    EXPECT_EQ(src.reads()[0].length, (idx.end_row(last) - idx.first_row(first)) * 8);
    if (last + 1 < idx.partition_count()) EXPECT_EQ(src.reads()[0].length, (last - first + 1) * idx.leaf_byte_size());
  }
}

TEST(Reconstruct, PartitionOfRow43425) {
  const Schema s({{"k", 1, AttrType::kInt32}, {"url", 2, AttrType::kVarchar}});
  std::vector<Record> rows;
  for (int32_t i = 0; i < 50000; ++i) rows.push_back(Record{{i, "http://u" + std::to_string(i)}});
  const PaxBlock b = SortAndIndex(MakeBlock(s, rows), 1, 1024);
  const VarOffsetList* offsets = b.index()->OffsetsFor(2);
  PaxBlockSource src(b);
  const auto out = Reconstruct(src, {43425}, {2});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(std::get<std::string>(out[0].values[0]), "http://u43425");
  ASSERT_EQ(src.reads().size(), 1u);
  EXPECT_EQ(43425 / 1024, 42);
  EXPECT_EQ(src.reads()[0].offset, offsets->offsets[42]);
  EXPECT_EQ(src.reads()[0].offset + src.reads()[0].length, offsets->offsets[43]);

  PaxBlockSource src0(b);
  EXPECT_EQ(std::get<std::string>(Reconstruct(src0, {0}, {2})[0].values[0]), "http://u0");
  EXPECT_EQ(src0.reads()[0].offset, 0u);
  EXPECT_EQ(src0.reads()[0].length, offsets->offsets[1]);
}

TEST(Reconstruct, RandomRowsMatchRowMajor) {
  std::mt19937_64 rng(6);
  const Schema s = MixedSchema();
  for (int trial = 0; trial < 40; ++trial) {
    const auto rows = testing::RandomRecords(s, 1 + rng() % 3000, rng);
    const SortedBlock sorted = SortBlock(MakeBlock(s, rows), 1);
    const PaxBlock b = SortAndIndex(MakeBlock(s, rows), 1, 1 + rng() % 300);
    std::vector<uint64_t> ids;
    for (uint64_t r = 0; r < b.row_count(); ++r) {
      if (rng() % 7 == 0) ids.push_back(r);
    }
    std::vector<int> projection = {1, 2, 3, 4, 5, 6, 7};
    std::shuffle(projection.begin(), projection.end(), rng);
    projection.resize(1 + rng() % 7);
    PaxBlockSource src(b);
    const auto out = Reconstruct(src, ids, projection);
    ASSERT_EQ(out.size(), ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
      const Record& original = rows[sorted.perm[ids[i]]];
      for (size_t j = 0; j < projection.size(); ++j) {
        EXPECT_EQ(out[i].values[j], original.values[projection[j] - 1]);
      }
    }
  }
}

// Index scan equals a brute-force filter, for every fixed-size key type.
TEST(IndexScanOracle, RangesOverAllKeyTypes) {
  std::mt19937_64 rng(7);
  const Schema s = MixedSchema();
  for (int trial = 0; trial < 60; ++trial) {
    const auto rows = testing::RandomRecords(s, 1 + rng() % 2000, rng, 1 + rng() % 200);
    const int key = std::vector<int>{1, 3, 4, 5, 6}[trial % 5];
    const PaxBlock b = SortAndIndex(MakeBlock(s, rows), key, 1 + rng() % 64);
    const auto& idx = b.index()->index;
    for (int q = 0; q < 10; ++q) {
      const Value a = rows[rng() % rows.size()].values[key - 1];
      const Value c = rows[rng() % rows.size()].values[key - 1];
      const Value& lo = a < c ? a : c;
      const Value& hi = a < c ? c : a;
      std::vector<std::string> want;
      for (const Record& r : rows) {
        const Value& v = r.values[key - 1];
        if (!(v < lo) && !(hi < v)) want.push_back(FormatRecord(r, s));
      }
      std::vector<std::string> got;
      PaxBlockSource src(b);
      if (auto range = LookupRange(idx, OrderedKey(lo), OrderedKey(hi))) {
        const auto hit = ReadPartitions(src, idx, *range, OrderedKey(lo), OrderedKey(hi));
        for (const Record& r : Reconstruct(src, hit.rows, {1, 2, 3, 4, 5, 6, 7})) got.push_back(FormatRecord(r, s));
      }
      std::sort(want.begin(), want.end());
      std::sort(got.begin(), got.end());
      EXPECT_EQ(got, want);
    }
  }
}

}  // namespace
}  // namespace hail
