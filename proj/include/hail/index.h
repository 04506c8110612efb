#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hail/pax_block.h"

namespace hail {

struct SortedBlock {
  PaxBlock block;
  std::vector<uint64_t> perm;  // new row -> original row
};

// Stable sort of every column by the key at `key_position`. The bad-record
// region is carried over untouched.
SortedBlock SortBlock(const PaxBlock& block, int key_position);

// Builds the sparse directory and one offset list per VARCHAR column.
// Throws NOT_SORTED if the key column ever descends.
IndexSection BuildIndex(const PaxBlock& sorted, int key_position, uint64_t partition_size);

// Sort + index + embed, as a datanode does for its replica.
PaxBlock SortAndIndex(const PaxBlock& block, int key_position, uint64_t partition_size);

struct PartitionRange {
  uint64_t first = 0;
  uint64_t last = 0;  // inclusive

  bool operator==(const PartitionRange&) const = default;
};

// Partitions that may hold keys in [lo, hi] (OrderedKey encoding). Returns
// nullopt when the directory alone proves no key can match.
std::optional<PartitionRange> LookupRange(const SparseClusteredIndex& index, uint64_t lo,
                                          uint64_t hi);

struct IndexScanResult {
  std::vector<uint64_t> rows;
  std::vector<uint64_t> keys;  // OrderedKey of each returned row
};

// Loads the key column of partitions [first, last] and returns the rows with
// key in [lo, hi]. Only the two boundary partitions are compared.
IndexScanResult ReadPartitions(ColumnSource& source, const SparseClusteredIndex& index,
                               PartitionRange range, uint64_t lo, uint64_t hi);

// Projected rows for ascending `rows`. Fixed-size values are fetched by
// offset; VARCHAR values by loading whole partitions bounded by the stored
// offsets. Without an index section a VARCHAR column is read whole.
std::vector<Record> Reconstruct(ColumnSource& source, const std::vector<uint64_t>& rows,
                                const std::vector<int>& projection);

struct IndexSizing {
  uint64_t rows = 0;
  uint64_t root_entries = 0;
  uint64_t root_bytes = 0;
  double ratio = 0;  // root bytes / block bytes
};

// Sizing of the root directory for a block of fixed-width rows.
IndexSizing ComputeIndexSizing(uint64_t block_bytes, uint64_t row_width, uint64_t key_size,
                               uint64_t partition_size);

}  // namespace hail
