#include "hail/schema.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hail/error.h"

namespace hail {

bool IsFixedSize(AttrType type) { return type != AttrType::kVarchar; }

size_t FixedSize(AttrType type) {
  switch (type) {
    case AttrType::kInt32:
    case AttrType::kDate:
    case AttrType::kIpv4:
      return 4;
    case AttrType::kInt64:
    case AttrType::kFloat64:
      return 8;
    case AttrType::kVarchar:
      return 0;
  }
  return 0;
}

std::string_view TypeName(AttrType type) {
  switch (type) {
    case AttrType::kInt32: return "INT32";
    case AttrType::kInt64: return "INT64";
    case AttrType::kFloat64: return "FLOAT64";
    case AttrType::kDate: return "DATE";
    case AttrType::kVarchar: return "VARCHAR";
    case AttrType::kIpv4: return "IPV4";
  }
  return "?";
}

std::optional<AttrType> ParseTypeName(std::string_view name) {
  for (AttrType t : {AttrType::kInt32, AttrType::kInt64, AttrType::kFloat64, AttrType::kDate,
                     AttrType::kVarchar, AttrType::kIpv4}) {
    if (TypeName(t) == name) return t;
  }
  return std::nullopt;
}

namespace {

template <typename T>
std::optional<T> ParseInteger(std::string_view text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) return std::nullopt;
  return v;
}

bool AllDigits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

std::optional<int32_t> ParseDate(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  std::string_view ys = text.substr(0, 4), ms = text.substr(5, 2), ds = text.substr(8, 2);
  if (!AllDigits(ys) || !AllDigits(ms) || !AllDigits(ds)) return std::nullopt;
  using namespace std::chrono;
  year_month_day ymd{year{*ParseInteger<int>(ys)}, month{*ParseInteger<unsigned>(ms)},
                     day{*ParseInteger<unsigned>(ds)}};
  if (!ymd.ok()) return std::nullopt;
  return static_cast<int32_t>(sys_days(ymd).time_since_epoch().count());
}

std::string FormatDate(int32_t days) {
  using namespace std::chrono;
  year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::optional<uint32_t> ParseIpv4(std::string_view text) {
  uint32_t ip = 0;
  for (int octet = 0; octet < 4; ++octet) {
    size_t dot = octet < 3 ? text.find('.') : text.size();
    if (dot == std::string_view::npos) return std::nullopt;
    std::string_view part = text.substr(0, dot);
    if (part.size() > 3 || !AllDigits(part)) return std::nullopt;
    unsigned v = *ParseInteger<unsigned>(part);
    if (v > 255) return std::nullopt;
    ip = ip << 8 | v;
    text = octet < 3 ? text.substr(dot + 1) : std::string_view{};
  }
  return ip;
}

std::string FormatIpv4(uint32_t ip) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u", ip >> 24, (ip >> 16) & 0xff, (ip >> 8) & 0xff,
                ip & 0xff);
  return buf;
}

std::optional<Value> ParseValue(AttrType type, std::string_view text) {
  switch (type) {
    case AttrType::kInt32:
      if (auto v = ParseInteger<int32_t>(text)) return Value(*v);
      return std::nullopt;
    case AttrType::kInt64:
      if (auto v = ParseInteger<int64_t>(text)) return Value(*v);
      return std::nullopt;
    case AttrType::kFloat64: {
      double v = 0;
      const char* end = text.data() + text.size();
      auto [ptr, ec] = std::from_chars(text.data(), end, v);
      if (ec != std::errc() || ptr != end || text.empty() || std::isnan(v)) return std::nullopt;
      // -0.0 and 0.0 compare equal as values; keep one bit pattern so the
      // ordered-key encoding agrees with value comparison.
      if (v == 0.0) v = 0.0;
      return Value(v);
    }
    case AttrType::kDate:
      if (auto v = ParseDate(text)) return Value(*v);
      return std::nullopt;
    case AttrType::kIpv4:
      if (auto v = ParseIpv4(text)) return Value(*v);
      return std::nullopt;
    case AttrType::kVarchar:
      if (text.find('\0') != std::string_view::npos) return std::nullopt;
      return Value(std::string(text));
  }
  return std::nullopt;
}

void AppendValue(std::string* out, AttrType type, const Value& value) {
  char buf[64];
  switch (type) {
    case AttrType::kInt32: {
      auto r = std::to_chars(buf, buf + sizeof(buf), std::get<int32_t>(value));
      out->append(buf, r.ptr);
      break;
    }
    case AttrType::kInt64: {
      auto r = std::to_chars(buf, buf + sizeof(buf), std::get<int64_t>(value));
      out->append(buf, r.ptr);
      break;
    }
    case AttrType::kFloat64: {
      auto r = std::to_chars(buf, buf + sizeof(buf), std::get<double>(value));
      out->append(buf, r.ptr);
      break;
    }
    case AttrType::kDate:
      out->append(FormatDate(std::get<int32_t>(value)));
      break;
    case AttrType::kIpv4:
      out->append(FormatIpv4(std::get<uint32_t>(value)));
      break;
    case AttrType::kVarchar:
      out->append(std::get<std::string>(value));
      break;
  }
}

std::string FormatValue(AttrType type, const Value& value) {
  std::string out;
  AppendValue(&out, type, value);
  return out;
}

namespace {
constexpr uint64_t kSignBit = 1ull << 63;

uint64_t OrderedSigned(int64_t v) { return static_cast<uint64_t>(v) ^ kSignBit; }

uint64_t OrderedDouble(double d) {
  uint64_t bits = std::bit_cast<uint64_t>(d);
  return (bits & kSignBit) ? ~bits : (bits | kSignBit);
}
}  // namespace

uint64_t OrderedKey(const Value& value) {
  return std::visit(
      [](const auto& v) -> uint64_t {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, int32_t> || std::is_same_v<T, int64_t>) {
          return OrderedSigned(v);
        } else if constexpr (std::is_same_v<T, double>) {
          return OrderedDouble(v);
        } else if constexpr (std::is_same_v<T, uint32_t>) {
          return v;
        } else {
          Throw(ErrorCode::kUnsupportedKeyType, "VARCHAR values have no ordered key");
        }
      },
      value);
}

uint64_t OrderedKeyFromRaw(AttrType type, const uint8_t* raw) {
  switch (type) {
    case AttrType::kInt32:
    case AttrType::kDate: {
      int32_t v;
      std::memcpy(&v, raw, 4);
      return OrderedSigned(v);
    }
    case AttrType::kIpv4: {
      uint32_t v;
      std::memcpy(&v, raw, 4);
      return v;
    }
    case AttrType::kInt64: {
      int64_t v;
      std::memcpy(&v, raw, 8);
      return OrderedSigned(v);
    }
    case AttrType::kFloat64: {
      double v;
      std::memcpy(&v, raw, 8);
      return OrderedDouble(v);
    }
    case AttrType::kVarchar:
      break;
  }
  Throw(ErrorCode::kUnsupportedKeyType, "VARCHAR values have no ordered key");
}

Schema::Schema(std::vector<Attribute> attributes, char delimiter) : delimiter_(delimiter) {
  if (attributes.empty()) Throw(ErrorCode::kInvalidArgument, "schema needs at least one attribute");
  std::sort(attributes.begin(), attributes.end(),
            [](const Attribute& a, const Attribute& b) { return a.position < b.position; });
  for (size_t i = 0; i < attributes.size(); ++i) {
    if (attributes[i].position != static_cast<int>(i + 1)) {
      Throw(ErrorCode::kInvalidArgument,
            "attribute positions must be contiguous from 1; found " +
                std::to_string(attributes[i].position) + " at slot " + std::to_string(i + 1));
    }
  }
  if (delimiter == '\n' || delimiter == '\0') {
    Throw(ErrorCode::kInvalidArgument, "invalid delimiter");
  }
  attributes_ = std::move(attributes);
}

Schema Schema::FromConfig(std::string_view text) {
  std::vector<Attribute> attrs;
  char delimiter = ',';
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::string keyword;
    if (!(fields >> keyword)) continue;
    if (keyword == "attr") {
      Attribute a;
      std::string type;
      if (!(fields >> a.position >> a.name >> type)) {
        Throw(ErrorCode::kSyntaxError, "schema line " + std::to_string(line_no) +
                                           ": expected `attr <position> <name> <type>`");
      }
      auto t = ParseTypeName(type);
      if (!t) Throw(ErrorCode::kSyntaxError, "schema line " + std::to_string(line_no) +
                                                 ": unknown type " + type);
      a.type = *t;
      attrs.push_back(std::move(a));
    } else if (keyword == "delimiter") {
      std::string d;
      fields >> d;
      if (d == "\\t" || d == "tab") {
        delimiter = '\t';
      } else if (d.size() == 1) {
        delimiter = d[0];
      } else {
        Throw(ErrorCode::kSyntaxError, "schema line " + std::to_string(line_no) +
                                           ": delimiter must be a single byte");
      }
    } else {
      Throw(ErrorCode::kSyntaxError,
            "schema line " + std::to_string(line_no) + ": unknown keyword " + keyword);
    }
  }
  return Schema(std::move(attrs), delimiter);
}

Schema Schema::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Throw(ErrorCode::kIoError, "cannot open schema " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return FromConfig(ss.str());
}

std::string Schema::ToConfig() const {
  std::string out;
  for (const Attribute& a : attributes_) {
    out += "attr " + std::to_string(a.position) + " " + a.name + " " +
           std::string(TypeName(a.type)) + "\n";
  }
  out += "delimiter ";
  out += delimiter_ == '\t' ? std::string("\\t") : std::string(1, delimiter_);
  out += "\n";
  return out;
}

const Attribute& Schema::at(int position) const {
  if (!HasPosition(position)) {
    Throw(ErrorCode::kPositionOutOfRange, "attribute position " + std::to_string(position) +
                                              " outside 1.." + std::to_string(size()));
  }
  return attributes_[position - 1];
}

std::optional<int> Schema::PositionOf(std::string_view name) const {
  for (const Attribute& a : attributes_) {
    if (a.name == name) return a.position;
  }
  return std::nullopt;
}

std::string_view BadReasonName(BadReason reason) {
  switch (reason) {
    case BadReason::kFieldCountMismatch: return "FIELD_COUNT_MISMATCH";
    case BadReason::kTypeParseFailure: return "TYPE_PARSE_FAILURE";
    case BadReason::kOversizedLine: return "OVERSIZED_LINE";
  }
  return "?";
}

ParsedLine ParseLine(std::string_view line, const Schema& schema) {
  const size_t k = schema.size();
  // An empty line has zero fields, not one empty field.
  if (line.empty()) return BadRecord{std::string(line), BadReason::kFieldCountMismatch};

  std::vector<std::string_view> fields;
  fields.reserve(k);
  size_t start = 0;
  while (true) {
    size_t pos = line.find(schema.delimiter(), start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
    if (fields.size() > k) break;
  }
  if (fields.size() != k) return BadRecord{std::string(line), BadReason::kFieldCountMismatch};

  Record record;
  record.values.reserve(k);
  for (size_t i = 0; i < k; ++i) {
    auto v = ParseValue(schema.attributes()[i].type, fields[i]);
    if (!v) return BadRecord{std::string(line), BadReason::kTypeParseFailure};
    record.values.push_back(std::move(*v));
  }
  return record;
}

std::string FormatRecord(const Record& record, const Schema& schema) {
  std::string out;
  for (size_t i = 0; i < record.values.size(); ++i) {
    if (i) out.push_back(schema.delimiter());
    AppendValue(&out, schema.attributes()[i].type, record.values[i]);
  }
  return out;
}

BlockCutter::BlockCutter(std::istream& in, const Schema& schema, uint64_t byte_budget)
    : in_(in), schema_(schema), byte_budget_(byte_budget) {
  if (byte_budget == 0) Throw(ErrorCode::kInvalidArgument, "block byte budget must be positive");
}

bool BlockCutter::ReadLine(std::string* line, uint64_t* raw_length) {
  constexpr size_t kReadSize = 1 << 20;
  while (true) {
    const char* begin = buffer_.data() + buffer_pos_;
    const size_t avail = buffer_.size() - buffer_pos_;
    const void* nl = std::memchr(begin, '\n', avail);
    if (nl != nullptr || (eof_ && avail > 0)) {
      size_t len = nl ? static_cast<const char*>(nl) - begin : avail;
      *raw_length = nl ? len + 1 : len;
      if (len > 0 && begin[len - 1] == '\r') --len;
      line->assign(begin, len);
      buffer_pos_ += *raw_length;
      return true;
    }
    if (eof_) return false;
    // Compact and refill.
    buffer_.erase(0, buffer_pos_);
    buffer_pos_ = 0;
    size_t old = buffer_.size();
    buffer_.resize(old + kReadSize);
    in_.read(buffer_.data() + old, kReadSize);
    buffer_.resize(old + static_cast<size_t>(in_.gcount()));
    if (static_cast<size_t>(in_.gcount()) < kReadSize) eof_ = true;
  }
}

std::optional<LogicalBlock> BlockCutter::Next() {
  LogicalBlock block;
  block.byte_budget = byte_budget_;
  block.text_offset = offset_;

  std::string line;
  uint64_t raw_length = 0;
  while (true) {
    if (has_pending_) {
      line = std::move(pending_line_);
      raw_length = pending_length_;
      has_pending_ = false;
    } else if (!ReadLine(&line, &raw_length)) {
      break;
    }
    if (block.line_count > 0 && block.text_bytes + raw_length > byte_budget_) {
      pending_line_ = std::move(line);
      pending_length_ = raw_length;
      has_pending_ = true;
      break;
    }
    block.text_bytes += raw_length;
    ++block.line_count;
    if (line.size() > byte_budget_) {
      block.bad_records.push_back(BadRecord{std::move(line), BadReason::kOversizedLine});
      continue;
    }
    ParsedLine parsed = ParseLine(line, schema_);
    if (auto* r = std::get_if<Record>(&parsed)) {
      block.records.push_back(std::move(*r));
    } else {
      block.bad_records.push_back(std::move(std::get<BadRecord>(parsed)));
    }
  }
  if (block.line_count == 0) return std::nullopt;
  offset_ += block.text_bytes;
  return block;
}

std::vector<LogicalBlock> CutBlocks(std::string_view input, const Schema& schema,
                                    uint64_t byte_budget) {
  std::istringstream in{std::string(input)};
  BlockCutter cutter(in, schema, byte_budget);
  std::vector<LogicalBlock> blocks;
  while (auto b = cutter.Next()) blocks.push_back(std::move(*b));
  return blocks;
}

}  // namespace hail
