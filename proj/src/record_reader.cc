#include "hail/record_reader.h"

#include <algorithm>

#include "hail/cluster.h"
#include "hail/error.h"
#include "hail/index.h"

namespace hail {

std::string_view ScanModeName(ScanMode mode) {
  return mode == ScanMode::kIndexScan ? "INDEX_SCAN" : "FULL_SCAN";
}

void IndexScan(ColumnSource& source, const BoundQuery& query, int index_attribute, ReaderOutput* out) {
  const std::optional<IndexSection>& section = source.index();
  const Conjunct* key = query.ConjunctOn(index_attribute);
  if (!section || section->index.key_position != index_attribute || key == nullptr) {
    Throw(ErrorCode::kInvalidArgument, "index scan needs an index on a filtered attribute");
  }
  std::vector<uint64_t> rows;
  if (std::optional<PartitionRange> range = LookupRange(section->index, key->key_lo(), key->key_hi())) {
    rows = ReadPartitions(source, section->index, *range, key->key_lo(), key->key_hi()).rows;
  }

  // Columns to fetch: projection first, then residual filter attributes.
  std::vector<int> fetch = query.projection;
  std::vector<std::pair<const Conjunct*, size_t>> residual;
  for (const Conjunct& c : query.conjuncts) {
    if (c.position == index_attribute) continue;
    auto at = std::find(fetch.begin(), fetch.end(), c.position);
    if (at == fetch.end()) {
      fetch.push_back(c.position);
      at = fetch.end() - 1;
    }
    residual.emplace_back(&c, at - fetch.begin());
  }

  std::vector<Record> recs = Reconstruct(source, rows, fetch);
  for (Record& r : recs) {
    bool ok = true;
    for (const auto& [c, slot] : residual) {
      if (!c->Matches(r.values[slot])) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    r.values.resize(query.projection.size());
    out->records.push_back(std::move(r));
  }
  for (std::string& bad : source.ReadBadRows()) out->bad_records.push_back(std::move(bad));
}

void FullScan(const PaxBlock& block, const BoundQuery& query, ReaderOutput* out) {
  const Schema& schema = block.schema();
  struct Check {
    const Conjunct* c;
    const Bytes* column;
    size_t width;
    const std::vector<uint64_t>* starts;
  };
  std::vector<Check> checks;
  for (const Conjunct& c : query.conjuncts) {
    const Attribute& a = schema.at(c.position);
    checks.push_back({&c, &block.column(c.position), FixedSize(a.type),
                      IsFixedSize(a.type) ? nullptr : &block.var_starts(c.position)});
  }
  for (uint64_t r = 0; r < block.row_count(); ++r) {
    bool ok = true;
    for (const Check& k : checks) {
      if (k.starts == nullptr) {
        const uint64_t key = OrderedKeyFromRaw(k.c->type, k.column->data() + r * k.width);
        ok = key >= k.c->key_lo() && key <= k.c->key_hi();
      } else {
        ok = k.c->Matches(Value(std::string(reinterpret_cast<const char*>(k.column->data() + (*k.starts)[r]))));
      }
      if (!ok) break;
    }
    if (!ok) continue;
    Record rec;
    rec.values.reserve(query.projection.size());
    for (int p : query.projection) rec.values.push_back(block.GetValue(p, r));
    out->records.push_back(std::move(rec));
  }
  for (const std::string& bad : block.bad_rows()) out->bad_records.push_back(bad);
}

void ReadBlock(Cluster& cluster, const BoundQuery& query, const ReadRequest& request, ReaderOutput* out) {
  std::vector<int> hosts;
  try {
    hosts = cluster.namenode().GetHostsWithIndex(request.block, request.index_attribute);
  } catch (const HailError& e) {
    Throw(ErrorCode::kReadFailed, e.what());
  }
  if (request.target != 0) {
    hosts.erase(std::remove(hosts.begin(), hosts.end(), request.target), hosts.end());
    hosts.insert(hosts.begin(), request.target);
  }
  std::string errors;
  for (int host : hosts) {
    const size_t records_before = out->records.size();
    const size_t bad_before = out->bad_records.size();
    try {
      std::unique_ptr<ReplicaFile> file = cluster.OpenReplica(request.block, host);
      BlockScan scan{request.block, host, ScanMode::kFullScan, 0, 0};
      const std::optional<IndexSection>* index = nullptr;
      if (!request.force_full_scan && request.index_attribute != 0 && query.ConjunctOn(request.index_attribute)) {
        index = &file->index();
      }
      if (index != nullptr && *index && (*index)->index.key_position == request.index_attribute) {
        scan.mode = ScanMode::kIndexScan;
        IndexScan(*file, query, request.index_attribute, out);
        scan.bytes_read = file->bytes_read();
      } else {
        const Bytes bytes = file->ReadAll();
        scan.bytes_read = bytes.size();
        FullScan(Deserialize(bytes), query, out);
      }
      scan.rows = out->records.size() - records_before;
      out->scans.push_back(scan);
      return;
    } catch (const HailError& e) {
      out->records.resize(records_before);
      out->bad_records.resize(bad_before);
      errors += " [dn" + std::to_string(host) + ": " + e.what() + "]";
    }
  }
  Throw(ErrorCode::kReadFailed, "no replica of " + request.block.ToString() + " could be read" + errors);
}

}  // namespace hail
