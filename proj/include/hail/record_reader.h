#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hail/annotation.h"
#include "hail/pax_block.h"
#include "hail/transport.h"

namespace hail {

class Cluster;

enum class ScanMode : uint8_t { kIndexScan, kFullScan };

std::string_view ScanModeName(ScanMode mode);

struct BlockScan {
  BlockId block;
  int datanode = 0;
  ScanMode mode = ScanMode::kFullScan;
  uint64_t bytes_read = 0;
  uint64_t rows = 0;
};

struct ReaderOutput {
  std::vector<Record> records;  // projected, in query projection order
  std::vector<std::string> bad_records;
  std::vector<BlockScan> scans;
};

// Index scan of one block: directory lookup, boundary post-filter, then
// reconstruction of the projected attributes of qualifying rows. Remaining
// conjuncts are applied after reconstruction. Bad records are always emitted.
void IndexScan(ColumnSource& source, const BoundQuery& query, int index_attribute, ReaderOutput* out);

// Predicate and projection over every row of a whole block.
void FullScan(const PaxBlock& block, const BoundQuery& query, ReaderOutput* out);

struct ReadRequest {
  BlockId block;
  int target = 0;
  int index_attribute = 0;  // 0 = no index usable for this query
  bool force_full_scan = false;
};

// Reads one block, trying `target` first and then the remaining live hosts
// in index-preference order. A replica is index-scanned only when its own
// index is on `index_attribute`. Throws READ_FAILED when every host fails.
void ReadBlock(Cluster& cluster, const BoundQuery& query, const ReadRequest& request, ReaderOutput* out);

}  // namespace hail
