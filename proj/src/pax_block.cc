#include "hail/pax_block.h"

#include <algorithm>
#include <bit>
#include <cstring>

#include "hail/error.h"

namespace hail {

namespace {

constexpr size_t kIndexFixedHeader = 64;
constexpr size_t kIndexVarListEntry = 24;

uint64_t CeilDiv(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

std::vector<uint64_t> ScanVarStarts(const Bytes& column, uint64_t row_count) {
  std::vector<uint64_t> starts;
  starts.reserve(row_count);
  uint64_t start = 0;
  const uint8_t* base = column.data();
  const size_t size = column.size();
  while (start < size) {
    starts.push_back(start);
    const void* z = std::memchr(base + start, 0, size - start);
    if (z == nullptr) {
      Throw(ErrorCode::kFormatError, "VARCHAR column is missing its final terminator");
    }
    start = static_cast<const uint8_t*>(z) - base + 1;
  }
  if (starts.size() != row_count) {
    Throw(ErrorCode::kFormatError, "VARCHAR column holds " + std::to_string(starts.size()) +
                                       " values, expected " + std::to_string(row_count));
  }
  return starts;
}

}  // namespace

const VarOffsetList* IndexSection::OffsetsFor(int position) const {
  for (const VarOffsetList& l : var_offsets) {
    if (l.position == position) return &l;
  }
  return nullptr;
}

const Extent& BlockHeader::column(int position) const {
  if (position < 1 || position > static_cast<int>(columns.size())) {
    Throw(ErrorCode::kPositionOutOfRange, "column position " + std::to_string(position));
  }
  return columns[position - 1];
}

uint64_t BlockHeader::file_size() const {
  uint64_t end = header_length;
  for (const Extent& e : columns) end = std::max(end, e.end());
  end = std::max(end, bad_region.end());
  end = std::max(end, index_section.end());
  return end;
}

Value DecodeFixed(AttrType type, const uint8_t* raw) {
  switch (type) {
    case AttrType::kInt32:
    case AttrType::kDate:
      return Value(static_cast<int32_t>(LoadU32(raw)));
    case AttrType::kIpv4:
      return Value(LoadU32(raw));
    case AttrType::kInt64:
      return Value(static_cast<int64_t>(LoadU64(raw)));
    case AttrType::kFloat64:
      return Value(std::bit_cast<double>(LoadU64(raw)));
    case AttrType::kVarchar:
      break;
  }
  Throw(ErrorCode::kInvalidArgument, "VARCHAR is not a fixed-size type");
}

void EncodeFixed(AttrType type, const Value& value, uint8_t* out) {
  switch (type) {
    case AttrType::kInt32:
    case AttrType::kDate:
      StoreU32(out, static_cast<uint32_t>(std::get<int32_t>(value)));
      return;
    case AttrType::kIpv4:
      StoreU32(out, std::get<uint32_t>(value));
      return;
    case AttrType::kInt64:
      StoreU64(out, static_cast<uint64_t>(std::get<int64_t>(value)));
      return;
    case AttrType::kFloat64:
      StoreU64(out, std::bit_cast<uint64_t>(std::get<double>(value)));
      return;
    case AttrType::kVarchar:
      break;
  }
  Throw(ErrorCode::kInvalidArgument, "VARCHAR is not a fixed-size type");
}

void RawFromOrderedKey(AttrType type, uint64_t key, uint8_t* out) {
  constexpr uint64_t kSign = 1ull << 63;
  switch (type) {
    case AttrType::kInt32:
    case AttrType::kDate:
      StoreU32(out, static_cast<uint32_t>(static_cast<int32_t>(static_cast<int64_t>(key ^ kSign))));
      return;
    case AttrType::kIpv4:
      StoreU32(out, static_cast<uint32_t>(key));
      return;
    case AttrType::kInt64:
      StoreU64(out, key ^ kSign);
      return;
    case AttrType::kFloat64:
      StoreU64(out, (key & kSign) ? (key & ~kSign) : ~key);
      return;
    case AttrType::kVarchar:
      break;
  }
  Throw(ErrorCode::kUnsupportedKeyType, "VARCHAR keys are not supported");
}

PaxBlock::PaxBlock(Schema schema, uint64_t row_count, std::vector<Bytes> columns,
                   std::vector<std::string> bad_rows, std::optional<IndexSection> index)
    : schema_(std::move(schema)),
      row_count_(row_count),
      columns_(std::move(columns)),
      bad_rows_(std::move(bad_rows)),
      index_(std::move(index)) {
  if (columns_.size() != schema_.size()) {
    Throw(ErrorCode::kFormatError, "block has " + std::to_string(columns_.size()) +
                                       " columns for a schema of " +
                                       std::to_string(schema_.size()));
  }
  var_starts_.resize(columns_.size());
  for (const Attribute& a : schema_.attributes()) {
    const Bytes& col = columns_[a.position - 1];
    if (IsFixedSize(a.type)) {
      if (col.size() != row_count_ * FixedSize(a.type)) {
        Throw(ErrorCode::kFormatError, "column " + a.name + " has " + std::to_string(col.size()) +
                                           " bytes for " + std::to_string(row_count_) + " rows");
      }
    } else {
      var_starts_[a.position - 1] = ScanVarStarts(col, row_count_);
    }
  }
}

const Bytes& PaxBlock::column(int position) const {
  schema_.at(position);
  return columns_[position - 1];
}

const std::vector<uint64_t>& PaxBlock::var_starts(int position) const {
  if (IsFixedSize(schema_.at(position).type)) {
    Throw(ErrorCode::kInvalidArgument, "attribute @" + std::to_string(position) +
                                           " is fixed-size and has no value offsets");
  }
  return var_starts_[position - 1];
}

Value PaxBlock::GetValue(int position, uint64_t row) const {
  const Attribute& a = schema_.at(position);
  if (row >= row_count_) Throw(ErrorCode::kInvalidArgument, "row " + std::to_string(row) + " out of range");
  const Bytes& col = columns_[position - 1];
  if (IsFixedSize(a.type)) return DecodeFixed(a.type, col.data() + row * FixedSize(a.type));
  const char* s = reinterpret_cast<const char*>(col.data() + var_starts_[position - 1][row]);
  return Value(std::string(s));
}

Record PaxBlock::GetRow(uint64_t row) const {
  Record r;
  r.values.reserve(schema_.size());
  for (const Attribute& a : schema_.attributes()) r.values.push_back(GetValue(a.position, row));
  return r;
}

PaxBlock PaxBlock::WithIndex(IndexSection index) && {
  index_ = std::move(index);
  return std::move(*this);
}

bool PaxBlock::operator==(const PaxBlock& other) const {
  return schema_ == other.schema_ && row_count_ == other.row_count_ &&
         columns_ == other.columns_ && bad_rows_ == other.bad_rows_ && index_ == other.index_;
}

PaxBlock ToPax(const LogicalBlock& block, const Schema& schema) {
  const uint64_t rows = block.records.size();
  std::vector<Bytes> columns(schema.size());
  for (const Attribute& a : schema.attributes()) {
    Bytes& col = columns[a.position - 1];
    if (IsFixedSize(a.type)) {
      const size_t w = FixedSize(a.type);
      col.resize(rows * w);
      for (uint64_t r = 0; r < rows; ++r) {
        EncodeFixed(a.type, block.records[r].values[a.position - 1], col.data() + r * w);
      }
    } else {
      size_t total = 0;
      for (const Record& rec : block.records) {
        total += std::get<std::string>(rec.values[a.position - 1]).size() + 1;
      }
      col.reserve(total);
      for (const Record& rec : block.records) {
        const std::string& s = std::get<std::string>(rec.values[a.position - 1]);
        col.insert(col.end(), s.begin(), s.end());
        col.push_back(0);
      }
    }
  }
  std::vector<std::string> bad;
  bad.reserve(block.bad_records.size());
  for (const BadRecord& b : block.bad_records) bad.push_back(b.raw);
  return PaxBlock(schema, rows, std::move(columns), std::move(bad));
}

std::vector<Value> ReadColumn(const PaxBlock& block, int position) {
  const Attribute& a = block.schema().at(position);
  std::vector<Value> out;
  out.reserve(block.row_count());
  const Bytes& col = block.column(position);
  if (IsFixedSize(a.type)) {
    const size_t w = FixedSize(a.type);
    for (uint64_t r = 0; r < block.row_count(); ++r) out.push_back(DecodeFixed(a.type, col.data() + r * w));
  } else {
    for (uint64_t start : block.var_starts(position)) {
      out.push_back(Value(std::string(reinterpret_cast<const char*>(col.data() + start))));
    }
  }
  return out;
}

// ---- index section -------------------------------------------------------

Bytes EncodeIndexSection(const IndexSection& section) {
  const SparseClusteredIndex& idx = section.index;
  const size_t key_size = FixedSize(idx.key_type);
  const uint64_t parts = idx.partition_count();
  const uint64_t root_offset = kIndexFixedHeader + kIndexVarListEntry * section.var_offsets.size();
  const uint64_t root_length = parts * key_size;

  Bytes out;
  out.reserve(root_offset + root_length + section.var_offsets.size() * parts * 8);
  ByteWriter w(&out);
  w.PutU8(kIndexTypeSparseClustered);
  w.PutU8(static_cast<uint8_t>(idx.key_type));
  w.PutU16(0);
  w.PutU32(static_cast<uint32_t>(idx.key_position));
  w.PutU64(idx.partition_size);
  w.PutU64(parts);
  w.PutU64(idx.row_count);
  w.PutU64(idx.max_key);
  w.PutU64(root_offset);
  w.PutU64(root_length);
  w.PutU32(static_cast<uint32_t>(section.var_offsets.size()));
  w.PutU32(0);
  uint64_t list_offset = root_offset + root_length;
  for (const VarOffsetList& l : section.var_offsets) {
    w.PutU32(static_cast<uint32_t>(l.position));
    w.PutU32(0);
    w.PutU64(list_offset);
    w.PutU64(l.offsets.size() * 8);
    list_offset += l.offsets.size() * 8;
  }
  uint8_t raw[8];
  for (uint64_t key : idx.root) {
    RawFromOrderedKey(idx.key_type, key, raw);
    w.PutBytes(ByteSpan(raw, key_size));
  }
  for (const VarOffsetList& l : section.var_offsets) {
    for (uint64_t off : l.offsets) w.PutU64(off);
  }
  return out;
}

IndexMetadata DescribeIndexSection(const IndexSection& section) {
  const SparseClusteredIndex& idx = section.index;
  IndexMetadata m;
  m.key_position = idx.key_position;
  m.partition_size = idx.partition_size;
  m.partition_count = idx.partition_count();
  m.root_offset = kIndexFixedHeader + kIndexVarListEntry * section.var_offsets.size();
  m.root_length = idx.partition_count() * FixedSize(idx.key_type);
  uint64_t off = m.root_offset + m.root_length;
  for (const VarOffsetList& l : section.var_offsets) {
    m.var_lists.push_back({l.position, off, l.offsets.size() * 8});
    off += l.offsets.size() * 8;
  }
  return m;
}

IndexSection DecodeIndexSection(ByteSpan bytes, const Schema& schema) {
  ByteReader r(bytes);
  IndexSection section;
  SparseClusteredIndex& idx = section.index;
  if (r.GetU8() != kIndexTypeSparseClustered) Throw(ErrorCode::kFormatError, "unknown index type");
  idx.key_type = static_cast<AttrType>(r.GetU8());
  r.GetU16();
  idx.key_position = static_cast<int>(r.GetU32());
  if (!schema.HasPosition(idx.key_position) || schema.at(idx.key_position).type != idx.key_type ||
      !IsFixedSize(idx.key_type)) {
    Throw(ErrorCode::kFormatError, "index key does not match the block schema");
  }
  idx.partition_size = r.GetU64();
  const uint64_t parts = r.GetU64();
  idx.row_count = r.GetU64();
  idx.max_key = r.GetU64();
  const uint64_t root_offset = r.GetU64();
  const uint64_t root_length = r.GetU64();
  const uint32_t lists = r.GetU32();
  r.GetU32();
  const size_t key_size = FixedSize(idx.key_type);
  if (idx.partition_size == 0 || parts != CeilDiv(idx.row_count, idx.partition_size) ||
      root_length != parts * key_size) {
    Throw(ErrorCode::kFormatError, "inconsistent index directory size");
  }
  struct ListLoc {
    int position;
    uint64_t offset, length;
  };
  std::vector<ListLoc> locs;
  for (uint32_t i = 0; i < lists; ++i) {
    ListLoc l;
    l.position = static_cast<int>(r.GetU32());
    r.GetU32();
    l.offset = r.GetU64();
    l.length = r.GetU64();
    if (!schema.HasPosition(l.position) || schema.at(l.position).type != AttrType::kVarchar ||
        l.length != parts * 8) {
      Throw(ErrorCode::kFormatError, "bad VARCHAR offset list descriptor");
    }
    locs.push_back(l);
  }
  if (root_offset != r.position() || root_offset + root_length > bytes.size()) {
    Throw(ErrorCode::kFormatError, "index root directory out of place");
  }
  idx.root.reserve(parts);
  for (uint64_t p = 0; p < parts; ++p) {
    idx.root.push_back(OrderedKeyFromRaw(idx.key_type, bytes.data() + root_offset + p * key_size));
  }
  uint64_t expect = root_offset + root_length;
  for (const ListLoc& l : locs) {
    if (l.offset != expect || l.offset + l.length > bytes.size()) {
      Throw(ErrorCode::kFormatError, "VARCHAR offset list out of place");
    }
    VarOffsetList list;
    list.position = l.position;
    list.offsets.reserve(parts);
    for (uint64_t p = 0; p < parts; ++p) list.offsets.push_back(LoadU64(bytes.data() + l.offset + p * 8));
    section.var_offsets.push_back(std::move(list));
    expect += l.length;
  }
  if (expect != bytes.size()) Throw(ErrorCode::kFormatError, "trailing bytes in index section");
  return section;
}

// ---- block layout --------------------------------------------------------

namespace {

uint64_t HeaderLength(const Schema& schema) {
  uint64_t len = 32;
  for (const Attribute& a : schema.attributes()) len += 8 + a.name.size();
  len += schema.size() * 16;
  len += 24 + 16;
  return len;
}

Bytes EncodeBadRegion(const std::vector<std::string>& rows) {
  Bytes out;
  ByteWriter w(&out);
  for (const std::string& row : rows) {
    w.PutU32(static_cast<uint32_t>(row.size()));
    w.PutString(row);
  }
  return out;
}

std::vector<std::string> DecodeBadRegion(ByteSpan bytes, uint64_t count) {
  ByteReader r(bytes);
  std::vector<std::string> rows;
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t len = r.GetU32();
    rows.push_back(r.GetString(len));
  }
  if (r.remaining() != 0) Throw(ErrorCode::kFormatError, "bad-record region has trailing bytes");
  return rows;
}

uint64_t BadRegionLength(const std::vector<std::string>& rows) {
  uint64_t len = 0;
  for (const std::string& row : rows) len += 4 + row.size();
  return len;
}

uint64_t IndexSectionLength(const std::optional<IndexSection>& index) {
  if (!index) return 0;
  const IndexMetadata m = DescribeIndexSection(*index);
  uint64_t len = m.root_offset + m.root_length;
  for (const auto& l : m.var_lists) len += l.length;
  return len;
}

void WriteHeader(const BlockHeader& h, ByteWriter& w) {
  w.PutBytes(ByteSpan(reinterpret_cast<const uint8_t*>(kBlockMagic), 4));
  w.PutU32(h.version);
  w.PutU64(h.header_length);
  w.PutU64(h.row_count);
  w.PutU32(static_cast<uint32_t>(h.schema.size()));
  w.PutU8(static_cast<uint8_t>(h.schema.delimiter()));
  w.PutZeros(3);
  for (const Attribute& a : h.schema.attributes()) {
    w.PutU32(static_cast<uint32_t>(a.position));
    w.PutU8(static_cast<uint8_t>(a.type));
    w.PutU8(0);
    w.PutU16(static_cast<uint16_t>(a.name.size()));
    w.PutString(a.name);
  }
  for (const Extent& e : h.columns) {
    w.PutU64(e.offset);
    w.PutU64(e.length);
  }
  w.PutU64(h.bad_region.offset);
  w.PutU64(h.bad_region.length);
  w.PutU64(h.bad_count);
  w.PutU64(h.index_section.offset);
  w.PutU64(h.index_section.length);
}

// Checks that header, columns, bad region and index section tile the block
// exactly, in ascending order, without gaps or overlap.
void CheckTiling(const BlockHeader& h, uint64_t total_size) {
  std::vector<Extent> parts(h.columns.begin(), h.columns.end());
  parts.push_back(h.bad_region);
  parts.push_back(h.index_section);
  std::stable_sort(parts.begin(), parts.end(),
                   [](const Extent& a, const Extent& b) { return a.offset < b.offset; });
  uint64_t cursor = h.header_length;
  for (const Extent& e : parts) {
    if (e.offset != cursor) {
      Throw(ErrorCode::kFormatError, "block sections do not tile: expected offset " +
                                         std::to_string(cursor) + ", found " +
                                         std::to_string(e.offset));
    }
    if (e.length > total_size - std::min(total_size, e.offset)) {
      Throw(ErrorCode::kFormatError, "block section runs past the end of the block");
    }
    cursor = e.end();
  }
  if (cursor != total_size) {
    Throw(ErrorCode::kFormatError, "block is " + std::to_string(total_size) +
                                       " bytes but sections end at " + std::to_string(cursor));
  }
}

}  // namespace

BlockHeader LayoutOf(const PaxBlock& block) {
  BlockHeader h;
  h.row_count = block.row_count();
  h.schema = block.schema();
  h.header_length = HeaderLength(block.schema());
  h.columns.resize(block.schema().size());
  uint64_t cursor = h.header_length;
  // Fixed-size columns first, then VARCHAR, each group in position order.
  for (bool fixed : {true, false}) {
    for (const Attribute& a : block.schema().attributes()) {
      if (IsFixedSize(a.type) != fixed) continue;
      h.columns[a.position - 1] = Extent{cursor, block.column(a.position).size()};
      cursor += block.column(a.position).size();
    }
  }
  h.bad_region = Extent{cursor, BadRegionLength(block.bad_rows())};
  h.bad_count = block.bad_rows().size();
  cursor = h.bad_region.end();
  h.index_section = Extent{cursor, IndexSectionLength(block.index())};
  return h;
}

Bytes Serialize(const PaxBlock& block) {
  const BlockHeader h = LayoutOf(block);
  Bytes out;
  out.reserve(h.file_size());
  ByteWriter w(&out);
  WriteHeader(h, w);
  for (bool fixed : {true, false}) {
    for (const Attribute& a : block.schema().attributes()) {
      if (IsFixedSize(a.type) == fixed) w.PutBytes(block.column(a.position));
    }
  }
  w.PutBytes(EncodeBadRegion(block.bad_rows()));
  if (block.index()) w.PutBytes(EncodeIndexSection(*block.index()));
  return out;
}

uint64_t PeekHeaderLength(ByteSpan prefix) {
  ByteReader r(prefix);
  ByteSpan magic = r.GetBytes(4);
  if (std::memcmp(magic.data(), kBlockMagic, 4) != 0) Throw(ErrorCode::kFormatError, "bad block magic");
  uint32_t version = r.GetU32();
  if (version != kBlockVersion) {
    Throw(ErrorCode::kFormatError, "unsupported block version " + std::to_string(version));
  }
  return r.GetU64();
}

BlockHeader ParseHeader(ByteSpan bytes) {
  BlockHeader h;
  h.header_length = PeekHeaderLength(bytes.first(std::min<size_t>(bytes.size(), kHeaderPrefixLength)));
  if (h.header_length > bytes.size()) Throw(ErrorCode::kFormatError, "truncated block header");
  ByteReader r(bytes.first(h.header_length));
  r.Skip(kHeaderPrefixLength);
  h.row_count = r.GetU64();
  const uint32_t attr_count = r.GetU32();
  const char delimiter = static_cast<char>(r.GetU8());
  r.Skip(3);
  std::vector<Attribute> attrs;
  for (uint32_t i = 0; i < attr_count; ++i) {
    Attribute a;
    a.position = static_cast<int>(r.GetU32());
    uint8_t type = r.GetU8();
    if (type < 1 || type > 6) Throw(ErrorCode::kFormatError, "unknown attribute type tag");
    a.type = static_cast<AttrType>(type);
    r.GetU8();
    a.name = r.GetString(r.GetU16());
    attrs.push_back(std::move(a));
  }
  try {
    h.schema = Schema(std::move(attrs), delimiter);
  } catch (const HailError& e) {
    Throw(ErrorCode::kFormatError, std::string("bad schema descriptor: ") + e.what());
  }
  h.columns.resize(attr_count);
  for (Extent& e : h.columns) {
    e.offset = r.GetU64();
    e.length = r.GetU64();
  }
  h.bad_region.offset = r.GetU64();
  h.bad_region.length = r.GetU64();
  h.bad_count = r.GetU64();
  h.index_section.offset = r.GetU64();
  h.index_section.length = r.GetU64();
  if (r.remaining() != 0) Throw(ErrorCode::kFormatError, "header length mismatch");
  return h;
}

PaxBlock Deserialize(ByteSpan bytes) {
  const BlockHeader h = ParseHeader(bytes);
  CheckTiling(h, bytes.size());
  std::vector<Bytes> columns;
  columns.reserve(h.columns.size());
  for (const Extent& e : h.columns) {
    columns.emplace_back(bytes.begin() + e.offset, bytes.begin() + e.end());
  }
  auto bad = DecodeBadRegion(bytes.subspan(h.bad_region.offset, h.bad_region.length), h.bad_count);
  std::optional<IndexSection> index;
  if (h.index_section.length > 0) {
    index = DecodeIndexSection(bytes.subspan(h.index_section.offset, h.index_section.length), h.schema);
    if (index->index.row_count != h.row_count) {
      Throw(ErrorCode::kFormatError, "index row count disagrees with block header");
    }
  }
  return PaxBlock(h.schema, h.row_count, std::move(columns), std::move(bad), std::move(index));
}

// ---- column sources ------------------------------------------------------

Bytes ColumnSource::Read(int position, uint64_t offset, uint64_t length) {
  reads_.push_back({position, offset, length});
  bytes_read_ += length;
  return DoRead(position, offset, length);
}

PaxBlockSource::PaxBlockSource(const PaxBlock& block) : block_(block), header_(LayoutOf(block)) {}

Bytes PaxBlockSource::DoRead(int position, uint64_t offset, uint64_t length) {
  const Bytes& col = block_.column(position);
  if (offset > col.size() || length > col.size() - offset) {
    Throw(ErrorCode::kReadFailed, "column read past end");
  }
  return Bytes(col.begin() + offset, col.begin() + offset + length);
}

}  // namespace hail
