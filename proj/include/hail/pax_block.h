#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hail/bytes.h"
#include "hail/schema.h"

namespace hail {

inline constexpr char kBlockMagic[4] = {'H', 'A', 'I', 'L'};
inline constexpr uint32_t kBlockVersion = 1;
inline constexpr uint8_t kIndexTypeSparseClustered = 1;
inline constexpr uint64_t kDefaultPartitionSize = 1024;

// Start offset of every n-th value of one VARCHAR column, one entry per
// index partition.
struct VarOffsetList {
  int position = 0;
  std::vector<uint64_t> offsets;

  bool operator==(const VarOffsetList&) const = default;
};

// Single-level sparse directory over a sorted fixed-size key column. Entry p
// is the key of row p * partition_size; partition p of the key column starts
// at p * leaf_byte_size(), so no child pointers are stored.
struct SparseClusteredIndex {
  int key_position = 0;
  AttrType key_type = AttrType::kInt32;
  uint64_t partition_size = kDefaultPartitionSize;
  uint64_t row_count = 0;
  std::vector<uint64_t> root;  // OrderedKey encoding
  uint64_t max_key = 0;        // OrderedKey of the last row; lets lookups reject ranges past the end

  uint64_t partition_count() const { return root.size(); }
  uint64_t leaf_byte_size() const { return partition_size * FixedSize(key_type); }
  // Rows [first_row, end_row) of partition p.
  uint64_t first_row(uint64_t p) const { return p * partition_size; }
  uint64_t end_row(uint64_t p) const { return std::min(row_count, (p + 1) * partition_size); }

  bool operator==(const SparseClusteredIndex&) const = default;
};

struct IndexSection {
  SparseClusteredIndex index;
  std::vector<VarOffsetList> var_offsets;  // one per VARCHAR column, position order

  const VarOffsetList* OffsetsFor(int position) const;
  bool operator==(const IndexSection&) const = default;
};

// Where the pieces of the index section sit, relative to the start of the
// section. Mirrors what the replica registers with the namenode.
struct IndexMetadata {
  uint8_t index_type = kIndexTypeSparseClustered;
  int key_position = 0;
  uint64_t partition_size = 0;
  uint64_t partition_count = 0;
  uint64_t root_offset = 0;
  uint64_t root_length = 0;
  struct VarList {
    int position = 0;
    uint64_t offset = 0;
    uint64_t length = 0;
  };
  std::vector<VarList> var_lists;
};

struct Extent {
  uint64_t offset = 0;
  uint64_t length = 0;

  uint64_t end() const { return offset + length; }
  bool operator==(const Extent&) const = default;
};

// Decoded block metadata: enough to locate every column, the bad-record
// region and the index section from the bytes alone.
struct BlockHeader {
  uint32_t version = kBlockVersion;
  uint64_t header_length = 0;
  uint64_t row_count = 0;
  Schema schema;
  std::vector<Extent> columns;  // indexed by position - 1
  Extent bad_region;
  uint64_t bad_count = 0;
  Extent index_section;

  const Extent& column(int position) const;
  uint64_t file_size() const;
};

// Immutable binary PAX block: one contiguous vector per attribute plus the
// verbatim lines that did not match the schema.
class PaxBlock {
 public:
  PaxBlock() = default;
  PaxBlock(Schema schema, uint64_t row_count, std::vector<Bytes> columns,
           std::vector<std::string> bad_rows, std::optional<IndexSection> index = std::nullopt);

  const Schema& schema() const { return schema_; }
  uint64_t row_count() const { return row_count_; }
  const Bytes& column(int position) const;
  const std::vector<Bytes>& columns() const { return columns_; }
  const std::vector<std::string>& bad_rows() const { return bad_rows_; }
  const std::optional<IndexSection>& index() const { return index_; }

  // Start offset of every value of a VARCHAR column.
  const std::vector<uint64_t>& var_starts(int position) const;

  Value GetValue(int position, uint64_t row) const;
  Record GetRow(uint64_t row) const;

  PaxBlock WithIndex(IndexSection index) &&;

  bool operator==(const PaxBlock& other) const;

 private:
  Schema schema_;
  uint64_t row_count_ = 0;
  std::vector<Bytes> columns_;
  std::vector<std::string> bad_rows_;
  std::optional<IndexSection> index_;
  std::vector<std::vector<uint64_t>> var_starts_;  // empty for fixed-size columns
};

PaxBlock ToPax(const LogicalBlock& block, const Schema& schema);

// Decodes the column at `position` (1-based) into row order.
std::vector<Value> ReadColumn(const PaxBlock& block, int position);

// Decodes one raw fixed-size value.
Value DecodeFixed(AttrType type, const uint8_t* raw);
void EncodeFixed(AttrType type, const Value& value, uint8_t* out);
// Inverse of OrderedKeyFromRaw.
void RawFromOrderedKey(AttrType type, uint64_t key, uint8_t* out);

BlockHeader LayoutOf(const PaxBlock& block);
Bytes Serialize(const PaxBlock& block);
PaxBlock Deserialize(ByteSpan bytes);

// Header parsing for readers that fetch ranges of a stored block.
inline constexpr size_t kHeaderPrefixLength = 16;
uint64_t PeekHeaderLength(ByteSpan prefix);
BlockHeader ParseHeader(ByteSpan bytes);
Bytes EncodeIndexSection(const IndexSection& section);
IndexSection DecodeIndexSection(ByteSpan bytes, const Schema& schema);
IndexMetadata DescribeIndexSection(const IndexSection& section);

struct ColumnRead {
  int position = 0;
  uint64_t offset = 0;
  uint64_t length = 0;
};

// Random access to the pieces of one block, in memory or on a datanode.
// Every column fetch is logged so callers can assert exactly what was read.
class ColumnSource {
 public:
  virtual ~ColumnSource() = default;

  virtual const BlockHeader& header() = 0;
  virtual const std::optional<IndexSection>& index() = 0;
  virtual std::vector<std::string> ReadBadRows() = 0;

  Bytes Read(int position, uint64_t offset, uint64_t length);
  const std::vector<ColumnRead>& reads() const { return reads_; }
  uint64_t bytes_read() const { return bytes_read_; }

 protected:
  virtual Bytes DoRead(int position, uint64_t offset, uint64_t length) = 0;

 private:
  std::vector<ColumnRead> reads_;
  uint64_t bytes_read_ = 0;
};

class PaxBlockSource : public ColumnSource {
 public:
  explicit PaxBlockSource(const PaxBlock& block);

  const BlockHeader& header() override { return header_; }
  const std::optional<IndexSection>& index() override { return block_.index(); }
  std::vector<std::string> ReadBadRows() override { return block_.bad_rows(); }

 protected:
  Bytes DoRead(int position, uint64_t offset, uint64_t length) override;

 private:
  const PaxBlock& block_;
  BlockHeader header_;
};

}  // namespace hail
