#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace hail {

// Wire tags are part of the block format; do not renumber.
enum class AttrType : uint8_t {
  kInt32 = 1,
  kInt64 = 2,
  kFloat64 = 3,
  kDate = 4,     // days since 1970-01-01, stored as int32
  kVarchar = 5,  // zero-terminated bytes
  kIpv4 = 6,     // dotted quad packed into a big-endian-ordered uint32
};

bool IsFixedSize(AttrType type);
// Byte width of a fixed-size type; 0 for VARCHAR.
size_t FixedSize(AttrType type);
std::string_view TypeName(AttrType type);
std::optional<AttrType> ParseTypeName(std::string_view name);

// INT32 and DATE hold int32_t, INT64 int64_t, FLOAT64 double, IPV4 uint32_t,
// VARCHAR std::string.
using Value = std::variant<int32_t, int64_t, double, uint32_t, std::string>;

std::optional<Value> ParseValue(AttrType type, std::string_view text);
std::string FormatValue(AttrType type, const Value& value);
void AppendValue(std::string* out, AttrType type, const Value& value);

std::optional<int32_t> ParseDate(std::string_view text);
std::string FormatDate(int32_t days);
std::optional<uint32_t> ParseIpv4(std::string_view text);
std::string FormatIpv4(uint32_t ip);

// Order-preserving map of a fixed-size value onto uint64_t, so sort keys of
// any fixed type compare with a single unsigned comparison.
uint64_t OrderedKey(const Value& value);
uint64_t OrderedKeyFromRaw(AttrType type, const uint8_t* raw);

struct Attribute {
  std::string name;
  int position = 0;  // 1-based
  AttrType type = AttrType::kInt32;

  bool operator==(const Attribute&) const = default;
};

class Schema {
 public:
  Schema() = default;
  // Attributes may be given in any order; they are stored by position.
  explicit Schema(std::vector<Attribute> attributes, char delimiter = ',');

  // Line-based config: `attr <position> <name> <type>` and `delimiter <char>`.
  static Schema FromConfig(std::string_view text);
  static Schema Load(const std::filesystem::path& path);
  std::string ToConfig() const;

  size_t size() const { return attributes_.size(); }
  const std::vector<Attribute>& attributes() const { return attributes_; }
  const Attribute& at(int position) const;
  bool HasPosition(int position) const {
    return position >= 1 && position <= static_cast<int>(attributes_.size());
  }
  std::optional<int> PositionOf(std::string_view name) const;
  char delimiter() const { return delimiter_; }

  bool operator==(const Schema&) const = default;

 private:
  std::vector<Attribute> attributes_;
  char delimiter_ = ',';
};

struct Record {
  std::vector<Value> values;

  bool operator==(const Record&) const = default;
};

enum class BadReason : uint8_t {
  kFieldCountMismatch,
  kTypeParseFailure,
  kOversizedLine,
};

std::string_view BadReasonName(BadReason reason);

struct BadRecord {
  std::string raw;
  BadReason reason = BadReason::kFieldCountMismatch;

  bool operator==(const BadRecord&) const = default;
};

using ParsedLine = std::variant<Record, BadRecord>;

// `line` must not contain '\n'. Bad input is data: this never throws.
ParsedLine ParseLine(std::string_view line, const Schema& schema);

std::string FormatRecord(const Record& record, const Schema& schema);

// A run of whole input lines whose text fits the byte budget. Lines are
// never split; a single line longer than the budget becomes its own block.
struct LogicalBlock {
  std::vector<Record> records;
  std::vector<BadRecord> bad_records;
  uint64_t byte_budget = 0;
  // Byte range of the source text this block covers, terminators included.
  uint64_t text_offset = 0;
  uint64_t text_bytes = 0;
  uint64_t line_count = 0;
};

inline constexpr uint64_t kDefaultBlockBudget = 4ull << 20;

// Streams logical blocks out of a text source without loading it whole.
class BlockCutter {
 public:
  BlockCutter(std::istream& in, const Schema& schema, uint64_t byte_budget);

  std::optional<LogicalBlock> Next();

 private:
  // Returns false at end of input. `line` excludes the terminator and any
  // trailing '\r'; `raw_length` counts every consumed byte.
  bool ReadLine(std::string* line, uint64_t* raw_length);

  std::istream& in_;
  const Schema& schema_;
  uint64_t byte_budget_;
  uint64_t offset_ = 0;

  std::string buffer_;
  size_t buffer_pos_ = 0;
  bool eof_ = false;

  bool has_pending_ = false;
  std::string pending_line_;
  uint64_t pending_length_ = 0;
};

std::vector<LogicalBlock> CutBlocks(std::string_view input, const Schema& schema,
                                    uint64_t byte_budget);

}  // namespace hail
