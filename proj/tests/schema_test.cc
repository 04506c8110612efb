#include <gtest/gtest.h>

#include <limits>
#include <random>
#include <sstream>

#include "hail/error.h"
#include "hail/schema.h"
#include "test_util.h"

namespace hail {
namespace {

Schema VisitSchema() {
  return Schema({{"sourceIP", 1, AttrType::kVarchar},
                 {"url", 2, AttrType::kVarchar},
                 {"visitDate", 3, AttrType::kDate},
                 {"duration", 4, AttrType::kInt32}});
}

TEST(ParseLine, ParsesTypedFields) {
  ParsedLine p = ParseLine("172.101.11.46,foo,1999-06-01,5", VisitSchema());
  ASSERT_TRUE(std::holds_alternative<Record>(p));
  const Record& r = std::get<Record>(p);
  ASSERT_EQ(r.values.size(), 4u);
  EXPECT_EQ(std::get<std::string>(r.values[0]), "172.101.11.46");
  EXPECT_EQ(std::get<std::string>(r.values[1]), "foo");
  EXPECT_EQ(FormatDate(std::get<int32_t>(r.values[2])), "1999-06-01");
  EXPECT_EQ(std::get<int32_t>(r.values[3]), 5);
}

TEST(ParseLine, EmptyLineIsFieldCountMismatch) {
  ParsedLine p = ParseLine("", VisitSchema());
  ASSERT_TRUE(std::holds_alternative<BadRecord>(p));
  EXPECT_EQ(std::get<BadRecord>(p).reason, BadReason::kFieldCountMismatch);
  EXPECT_EQ(std::get<BadRecord>(p).raw, "");
}

TEST(ParseLine, MalformedFieldIsTypeParseFailure) {
  ParsedLine p = ParseLine("a,b,not-a-date,5", VisitSchema());
  ASSERT_TRUE(std::holds_alternative<BadRecord>(p));
  EXPECT_EQ(std::get<BadRecord>(p).reason, BadReason::kTypeParseFailure);
  EXPECT_EQ(std::get<BadRecord>(p).raw, "a,b,not-a-date,5");
}

TEST(ParseLine, FieldCountAndOverflow) {
  EXPECT_TRUE(std::holds_alternative<BadRecord>(ParseLine("a,b,1999-06-01", VisitSchema())));
  EXPECT_TRUE(std::holds_alternative<BadRecord>(ParseLine("a,b,1999-06-01,5,6", VisitSchema())));
  auto p = ParseLine("a,b,1999-06-01,2147483648", VisitSchema());
  ASSERT_TRUE(std::holds_alternative<BadRecord>(p));
  EXPECT_EQ(std::get<BadRecord>(p).reason, BadReason::kTypeParseFailure);
  std::string with_nul = "a,b";
  with_nul.push_back('\0');
  with_nul += ",1999-06-01,1";
  EXPECT_TRUE(std::holds_alternative<BadRecord>(ParseLine(with_nul, VisitSchema())));
}

TEST(Values, DatesAreDaysSinceEpoch) {
  EXPECT_EQ(*ParseDate("1970-01-01"), 0);
  EXPECT_EQ(*ParseDate("1970-01-02"), 1);
  EXPECT_EQ(*ParseDate("1969-12-31"), -1);
  EXPECT_EQ(*ParseDate("2000-03-01") - *ParseDate("2000-02-28"), 2);  // leap year
  EXPECT_EQ(*ParseDate("1900-03-01") - *ParseDate("1900-02-28"), 1);
  EXPECT_FALSE(ParseDate("1999-02-29"));
  EXPECT_FALSE(ParseDate("1999-13-01"));
  EXPECT_FALSE(ParseDate("1999-1-01"));
  for (int d = -40000; d < 40000; d += 37) EXPECT_EQ(*ParseDate(FormatDate(d)), d);
}

TEST(Values, Ipv4) {
  EXPECT_EQ(*ParseIpv4("172.101.11.46"), (172u << 24) | (101u << 16) | (11u << 8) | 46u);
  EXPECT_EQ(FormatIpv4(*ParseIpv4("0.0.0.0")), "0.0.0.0");
  EXPECT_EQ(FormatIpv4(*ParseIpv4("255.255.255.255")), "255.255.255.255");
  EXPECT_FALSE(ParseIpv4("256.1.1.1"));
  EXPECT_FALSE(ParseIpv4("1.2.3"));
  EXPECT_FALSE(ParseIpv4("1.2.3.4.5"));
  EXPECT_FALSE(ParseIpv4("a.b.c.d"));
}

TEST(Values, FloatRejectsNan) {
  EXPECT_FALSE(ParseValue(AttrType::kFloat64, "nan"));
  EXPECT_EQ(std::get<double>(*ParseValue(AttrType::kFloat64, "12.5")), 12.5);
  EXPECT_EQ(OrderedKey(*ParseValue(AttrType::kFloat64, "-0")), OrderedKey(*ParseValue(AttrType::kFloat64, "0")));
}

// The ordered key must sort exactly like the decoded values.
TEST(Values, OrderedKeyPreservesOrder) {
  std::mt19937_64 rng(7);
  for (AttrType t : {AttrType::kInt32, AttrType::kInt64, AttrType::kFloat64, AttrType::kDate, AttrType::kIpv4}) {
    for (int i = 0; i < 5000; ++i) {
      Value a = testing::RandomValue(t, rng, 1 << 20);
      Value b = testing::RandomValue(t, rng, 1 << 20);
      EXPECT_EQ(a < b, OrderedKey(a) < OrderedKey(b)) << TypeName(t);
      EXPECT_EQ(a == b, OrderedKey(a) == OrderedKey(b)) << TypeName(t);
    }
  }
  EXPECT_LT(OrderedKey(Value(int32_t{-1})), OrderedKey(Value(int32_t{0})));
  EXPECT_LT(OrderedKey(Value(-1e300)), OrderedKey(Value(-1.0)));
  EXPECT_LT(OrderedKey(Value(std::numeric_limits<int64_t>::min())), OrderedKey(Value(int64_t{0})));
}

TEST(Values, FormatParseRoundTrip) {
  std::mt19937_64 rng(11);
  const Schema s = testing::MixedSchema();
  for (const Record& r : testing::RandomRecords(s, 500, rng, 20000)) {
    ParsedLine p = ParseLine(FormatRecord(r, s), s);
    ASSERT_TRUE(std::holds_alternative<Record>(p)) << FormatRecord(r, s);
    EXPECT_EQ(std::get<Record>(p), r);
  }
}

TEST(SchemaConfig, RoundTripAndErrors) {
  const Schema s = testing::MixedSchema();
  EXPECT_EQ(Schema::FromConfig(s.ToConfig()), s);
  const Schema t = Schema::FromConfig("# comment\ndelimiter |\nattr 2 b VARCHAR\nattr 1 a INT64\n");
  EXPECT_EQ(t.delimiter(), '|');
  EXPECT_EQ(t.at(1).name, "a");
  EXPECT_EQ(t.at(2).type, AttrType::kVarchar);
  EXPECT_EQ(*t.PositionOf("b"), 2);
  EXPECT_THROW(Schema::FromConfig("attr 1 a BLOB\n"), HailError);
  EXPECT_THROW(Schema::FromConfig("column 1 a INT32\n"), HailError);
  EXPECT_THROW(Schema::FromConfig("attr 1 a INT32\nattr 3 b INT32\n"), HailError);
}

// Brute-force oracle: greedy packing over line lengths.
std::vector<uint64_t> OracleBlockSizes(const std::vector<uint64_t>& line_bytes, uint64_t budget) {
  std::vector<uint64_t> counts;
  uint64_t used = 0, n = 0;
  for (uint64_t len : line_bytes) {
    if (n > 0 && used + len > budget) {
      counts.push_back(n);
      used = 0;
      n = 0;
    }
    used += len;
    ++n;
  }
  if (n > 0) counts.push_back(n);
  return counts;
}

TEST(CutBlocks, TenLinesOfTenBytes) {
  const Schema s({{"v", 1, AttrType::kVarchar}});
  std::string input;
  for (int i = 0; i < 10; ++i) input += "line-" + std::to_string(1000 + i) + "\n";  // 10 bytes each
  ASSERT_EQ(input.size(), 100u);
  const auto blocks = CutBlocks(input, s, 35);
  std::vector<uint64_t> counts;
  for (const auto& b : blocks) counts.push_back(b.line_count);
  EXPECT_EQ(counts, (std::vector<uint64_t>{3, 3, 3, 1}));
  EXPECT_EQ(counts, OracleBlockSizes(std::vector<uint64_t>(10, 10), 35));
}

TEST(CutBlocks, SingleLineAndExactBoundary) {
  const Schema s({{"v", 1, AttrType::kVarchar}});
  auto one = CutBlocks("hello\n", s, 100);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].records.size(), 1u);
  // 4 lines of 10 bytes fill a 40 byte budget exactly; line 5 opens block 2.
  std::string input;
  for (int i = 0; i < 5; ++i) input += "abcdefghi\n";
  auto blocks = CutBlocks(input, s, 40);
  ASSERT_EQ(blocks.size(), 2u);
  EXPECT_EQ(blocks[0].line_count, 4u);
  EXPECT_EQ(blocks[0].text_bytes, 40u);
  EXPECT_EQ(blocks[1].line_count, 1u);
}

TEST(CutBlocks, CrLfAndMissingFinalNewline) {
  const Schema s({{"a", 1, AttrType::kInt32}, {"b", 2, AttrType::kVarchar}});
  auto blocks = CutBlocks("1,x\r\n2,y\n3,z", s, 1000);
  ASSERT_EQ(blocks.size(), 1u);
  ASSERT_EQ(blocks[0].records.size(), 3u);
  EXPECT_EQ(std::get<std::string>(blocks[0].records[0].values[1]), "x");
  EXPECT_EQ(std::get<std::string>(blocks[0].records[2].values[1]), "z");
  EXPECT_EQ(blocks[0].text_bytes, 12u);
}

TEST(CutBlocks, OversizedLineBecomesItsOwnBadBlock) {
  const Schema s({{"v", 1, AttrType::kVarchar}});
  auto blocks = CutBlocks("ab\n" + std::string(50, 'x') + "\ncd\n", s, 10);
  ASSERT_EQ(blocks.size(), 3u);
  ASSERT_EQ(blocks[1].bad_records.size(), 1u);
  EXPECT_EQ(blocks[1].bad_records[0].reason, BadReason::kOversizedLine);
  EXPECT_EQ(blocks[1].bad_records[0].raw, std::string(50, 'x'));
}

// Round trip, row partition and determinism over random text.
TEST(CutBlocks, PropertiesOverRandomText) {
  std::mt19937_64 rng(3);
  const Schema s({{"a", 1, AttrType::kInt32}, {"b", 2, AttrType::kVarchar}});
  for (int trial = 0; trial < 200; ++trial) {
    std::string input;
    std::vector<uint64_t> line_bytes;
    const int lines = std::uniform_int_distribution<int>(0, 60)(rng);
    for (int i = 0; i < lines; ++i) {
      std::string line;
      switch (std::uniform_int_distribution<int>(0, 4)(rng)) {
        case 0: line = "garbage"; break;
        case 1: line = ""; break;
        default: line = std::to_string(rng() % 1000) + "," + std::string(rng() % 20, 'q'); break;
      }
      const bool last = i + 1 == lines;
      const bool newline = !last || line.empty() || rng() % 2 == 0;
      input += line + (newline ? "\n" : "");
      line_bytes.push_back(line.size() + (newline ? 1 : 0));
    }
    const uint64_t budget = std::uniform_int_distribution<uint64_t>(1, 120)(rng);
    const auto blocks = CutBlocks(input, s, budget);
    std::string rebuilt;
    uint64_t rows = 0, offset = 0;
    std::vector<uint64_t> counts;
    for (const auto& b : blocks) {
      EXPECT_EQ(b.text_offset, offset);
      rebuilt += input.substr(b.text_offset, b.text_bytes);
      offset += b.text_bytes;
      EXPECT_EQ(b.records.size() + b.bad_records.size(), b.line_count);
      rows += b.line_count;
      counts.push_back(b.line_count);
    }
    EXPECT_EQ(rebuilt, input);
    EXPECT_EQ(rows, static_cast<uint64_t>(lines));
    EXPECT_EQ(counts, OracleBlockSizes(line_bytes, budget));
    const auto again = CutBlocks(input, s, budget);
    ASSERT_EQ(again.size(), blocks.size());
    for (size_t i = 0; i < blocks.size(); ++i) EXPECT_EQ(again[i].text_bytes, blocks[i].text_bytes);
  }
}

TEST(CutBlocks, StreamingMatchesWholeInput) {
  std::mt19937_64 rng(5);
  const Schema s = testing::MixedSchema();
  std::string input;
  for (const Record& r : testing::RandomRecords(s, 3000, rng)) input += FormatRecord(r, s) + "\n";
  std::istringstream in(input);
  BlockCutter cutter(in, s, 4096);
  const auto whole = CutBlocks(input, s, 4096);
  size_t i = 0;
  while (auto b = cutter.Next()) {
    ASSERT_LT(i, whole.size());
    EXPECT_EQ(b->records, whole[i].records);
    EXPECT_EQ(b->text_offset, whole[i].text_offset);
    ++i;
  }
  EXPECT_EQ(i, whole.size());
}

}  // namespace
}  // namespace hail
