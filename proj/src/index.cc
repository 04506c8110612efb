#include "hail/index.h"

#include <algorithm>
#include <cstring>
#include <numeric>

#include "hail/error.h"

namespace hail {

namespace {

const Attribute& KeyAttribute(const Schema& schema, int key_position) {
  const Attribute& a = schema.at(key_position);
  if (!IsFixedSize(a.type)) {
    Throw(ErrorCode::kUnsupportedKeyType, "cannot sort or index VARCHAR attribute " + a.name);
  }
  return a;
}

std::vector<uint64_t> KeyColumn(const PaxBlock& block, const Attribute& key) {
  const size_t w = FixedSize(key.type);
  const Bytes& col = block.column(key.position);
  std::vector<uint64_t> keys(block.row_count());
  for (uint64_t r = 0; r < keys.size(); ++r) keys[r] = OrderedKeyFromRaw(key.type, col.data() + r * w);
  return keys;
}

}  // namespace

SortedBlock SortBlock(const PaxBlock& block, int key_position) {
  const Attribute& key = KeyAttribute(block.schema(), key_position);
  const std::vector<uint64_t> keys = KeyColumn(block, key);
  std::vector<uint64_t> perm(block.row_count());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(),
                   [&keys](uint64_t a, uint64_t b) { return keys[a] < keys[b]; });

  std::vector<Bytes> columns(block.schema().size());
  for (const Attribute& a : block.schema().attributes()) {
    const Bytes& src = block.column(a.position);
    Bytes& dst = columns[a.position - 1];
    dst.resize(src.size());
    if (IsFixedSize(a.type)) {
      const size_t w = FixedSize(a.type);
      for (uint64_t r = 0; r < perm.size(); ++r) {
        std::memcpy(dst.data() + r * w, src.data() + perm[r] * w, w);
      }
    } else {
      const std::vector<uint64_t>& starts = block.var_starts(a.position);
      uint8_t* out = dst.data();
      for (uint64_t r = 0; r < perm.size(); ++r) {
        const uint64_t begin = starts[perm[r]];
        const uint64_t end = perm[r] + 1 < starts.size() ? starts[perm[r] + 1] : src.size();
        std::memcpy(out, src.data() + begin, end - begin);
        out += end - begin;
      }
    }
  }
  return {PaxBlock(block.schema(), block.row_count(), std::move(columns), block.bad_rows()),
          std::move(perm)};
}

IndexSection BuildIndex(const PaxBlock& sorted, int key_position, uint64_t partition_size) {
  if (partition_size == 0) Throw(ErrorCode::kInvalidArgument, "partition size must be >= 1");
  const Attribute& key = KeyAttribute(sorted.schema(), key_position);
  const std::vector<uint64_t> keys = KeyColumn(sorted, key);
  for (uint64_t r = 1; r < keys.size(); ++r) {
    if (keys[r] < keys[r - 1]) {
      Throw(ErrorCode::kNotSorted, "key " + key.name + " descends at row " + std::to_string(r));
    }
  }
  IndexSection section;
  SparseClusteredIndex& idx = section.index;
  idx.key_position = key_position;
  idx.key_type = key.type;
  idx.partition_size = partition_size;
  idx.row_count = sorted.row_count();
  for (uint64_t r = 0; r < keys.size(); r += partition_size) idx.root.push_back(keys[r]);
  idx.max_key = keys.empty() ? 0 : keys.back();
  for (const Attribute& a : sorted.schema().attributes()) {
    if (IsFixedSize(a.type)) continue;
    VarOffsetList list;
    list.position = a.position;
    const std::vector<uint64_t>& starts = sorted.var_starts(a.position);
    for (uint64_t r = 0; r < starts.size(); r += partition_size) list.offsets.push_back(starts[r]);
    section.var_offsets.push_back(std::move(list));
  }
  return section;
}

PaxBlock SortAndIndex(const PaxBlock& block, int key_position, uint64_t partition_size) {
  SortedBlock s = SortBlock(block, key_position);
  IndexSection section = BuildIndex(s.block, key_position, partition_size);
  return std::move(s.block).WithIndex(std::move(section));
}

std::optional<PartitionRange> LookupRange(const SparseClusteredIndex& index, uint64_t lo,
                                          uint64_t hi) {
  const std::vector<uint64_t>& root = index.root;
  if (root.empty() || lo > hi || lo > index.max_key) return std::nullopt;
  // Partitions before the first entry >= lo hold only keys < lo, except the
  // one right before it, whose tail may still reach lo (duplicates included).
  const uint64_t lb = std::lower_bound(root.begin(), root.end(), lo) - root.begin();
  const uint64_t ub = std::upper_bound(root.begin(), root.end(), hi) - root.begin();
  if (ub == 0) return std::nullopt;
  return PartitionRange{lb == 0 ? 0 : lb - 1, ub - 1};
}

IndexScanResult ReadPartitions(ColumnSource& source, const SparseClusteredIndex& index,
                               PartitionRange range, uint64_t lo, uint64_t hi) {
  IndexScanResult out;
  if (range.last >= index.partition_count() || range.first > range.last) {
    Throw(ErrorCode::kInvalidArgument, "partition range out of bounds");
  }
  const size_t w = FixedSize(index.key_type);
  const uint64_t begin_row = index.first_row(range.first);
  const uint64_t end_row = index.end_row(range.last);
  const Bytes keys = source.Read(index.key_position, begin_row * w, (end_row - begin_row) * w);

  const uint64_t first_end = index.end_row(range.first);
  const uint64_t last_begin = index.first_row(range.last);
  for (uint64_t r = begin_row; r < end_row; ++r) {
    const uint64_t k = OrderedKeyFromRaw(index.key_type, keys.data() + (r - begin_row) * w);
    const bool boundary = r < first_end || r >= last_begin;
    if (boundary && (k < lo || k > hi)) continue;
    out.rows.push_back(r);
    out.keys.push_back(k);
  }
  return out;
}

std::vector<Record> Reconstruct(ColumnSource& source, const std::vector<uint64_t>& rows,
                                const std::vector<int>& projection) {
  std::vector<Record> out(rows.size());
  for (Record& r : out) r.values.reserve(projection.size());
  if (rows.empty()) return out;
  const BlockHeader& h = source.header();
  const uint64_t lo_row = rows.front();
  const uint64_t hi_row = rows.back();
  if (hi_row >= h.row_count || !std::is_sorted(rows.begin(), rows.end())) {
    Throw(ErrorCode::kInvalidArgument, "row IDs must be ascending and in range");
  }
  const std::optional<IndexSection>& index = source.index();

  for (int pos : projection) {
    const Attribute& a = h.schema.at(pos);
    if (IsFixedSize(a.type)) {
      const size_t w = FixedSize(a.type);
      const Bytes span = source.Read(pos, lo_row * w, (hi_row - lo_row + 1) * w);
      for (size_t i = 0; i < rows.size(); ++i) {
        out[i].values.push_back(DecodeFixed(a.type, span.data() + (rows[i] - lo_row) * w));
      }
      continue;
    }

    const uint64_t col_len = h.column(pos).length;
    uint64_t base_row = 0;
    uint64_t begin = 0;
    uint64_t end = col_len;
    const VarOffsetList* offsets = index ? index->OffsetsFor(pos) : nullptr;
    if (offsets != nullptr) {
      const uint64_t n = index->index.partition_size;
      const uint64_t p_first = lo_row / n;
      const uint64_t p_last = hi_row / n;
      base_row = p_first * n;
      begin = offsets->offsets.at(p_first);
      end = p_last + 1 < offsets->offsets.size() ? offsets->offsets[p_last + 1] : col_len;
    }
    const Bytes span = source.Read(pos, begin, end - begin);
    // Walk terminators once, handing out values as their rows come up.
    uint64_t row = base_row;
    size_t at = 0;
    size_t next = 0;
    while (next < rows.size()) {
      const void* z = std::memchr(span.data() + at, 0, span.size() - at);
      if (z == nullptr) Throw(ErrorCode::kReadFailed, "VARCHAR partition is truncated");
      const size_t stop = static_cast<const uint8_t*>(z) - span.data();
      if (row == rows[next]) {
        std::string v(reinterpret_cast<const char*>(span.data() + at), stop - at);
        while (next < rows.size() && rows[next] == row) out[next++].values.push_back(v);
      }
      at = stop + 1;
      ++row;
    }
  }
  return out;
}

IndexSizing ComputeIndexSizing(uint64_t block_bytes, uint64_t row_width, uint64_t key_size,
                               uint64_t partition_size) {
  IndexSizing s;
  s.rows = block_bytes / row_width;
  s.root_entries = (s.rows + partition_size - 1) / partition_size;
  s.root_bytes = s.root_entries * key_size;
  s.ratio = static_cast<double>(s.root_bytes) / static_cast<double>(block_bytes);
  return s;
}

}  // namespace hail
