#include "hail/bench.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "hail/annotation.h"
#include "hail/error.h"
#include "hail/job.h"

namespace hail {

namespace {

using Clock = std::chrono::steady_clock;

const std::vector<std::string> kColumns = {
    "scenario",         "kind",
    "label",            "dataset",
    "datanodes",        "map_slots",
    "replication",      "sort_keys",
    "rows",             "blocks",
    "repetitions",      "upload_seconds",
    "fullscan_end_to_end", "fullscan_record_reader",
    "default_end_to_end", "default_record_reader",
    "default_overhead", "default_map_tasks",
    "hail_end_to_end",  "hail_record_reader",
    "hail_overhead",    "hail_map_tasks",
    "result_rows",      "selectivity",
    "baseline_seconds", "failure_seconds",
    "slowdown",         "rescheduled_tasks",
    "rescheduled_index_scans", "result_digest",
    "equivalent",
};

std::string KeysText(const ReplicaConfig& r) {
  std::string s;
  for (int k : r.KeysForPipeline()) {
    if (!s.empty()) s += ';';
    s += k == 0 ? "NONE" : "@" + std::to_string(k);
  }
  return s;
}

ReplicaConfig Replicas(std::vector<int> keys, uint64_t partition_size) {
  ReplicaConfig r;
  r.replication = static_cast<int>(keys.size());
  r.sort_keys = std::move(keys);
  r.partition_size = partition_size;
  return r;
}

double Mean(const std::vector<double>& v) {
  return v.empty() ? 0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

template <typename Fn>
auto Step(const std::string& what, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::exception& e) {
    Throw(ErrorCode::kScenarioFailed, what + ": " + e.what());
  }
}

BenchRow BaseRow(const BenchScenario& s, const std::string& kind, const std::string& label,
                 const ReplicaConfig& replicas) {
  BenchRow row;
  row.Set("scenario", s.name);
  row.Set("kind", kind);
  row.Set("label", label);
  row.Set("dataset", std::string(DatasetName(s.dataset)));
  row.Set("datanodes", s.cluster.datanodes);
  row.Set("map_slots", s.cluster.map_slots);
  row.Set("replication", replicas.replication);
  row.Set("sort_keys", KeysText(replicas));
  row.Set("repetitions", s.repetitions);
  return row;
}

struct QueryRuns {
  std::vector<double> end_to_end;
  std::vector<double> record_reader;
  std::vector<double> overhead;
  int map_tasks = 0;
  std::string digest;
  uint64_t records = 0;
};

}  // namespace

std::string_view DatasetName(Dataset dataset) {
  return dataset == Dataset::kUserVisits ? "uservisits" : "synthetic";
}

Schema DatasetSchema(Dataset dataset) {
  return dataset == Dataset::kUserVisits ? UserVisitsSchema() : SyntheticSchema();
}

void BenchScenario::Validate() const {
  if (repetitions < 1) Throw(ErrorCode::kInvalidArgument, "repetitions must be >= 1");
  if (failover_fraction && (*failover_fraction <= 0 || *failover_fraction >= 1)) {
    Throw(ErrorCode::kInvalidArgument, "failover fraction must lie in (0,1)");
  }
  if (uploads.empty()) Throw(ErrorCode::kInvalidArgument, "scenario has no upload variants");
  if (query_upload && *query_upload >= uploads.size()) {
    Throw(ErrorCode::kInvalidArgument, "query_upload out of range");
  }
  if (failover_fraction && queries.empty()) Throw(ErrorCode::kInvalidArgument, "failover needs a query");
  if (cluster.storage_root.empty()) Throw(ErrorCode::kInvalidArgument, "storage_root not set");
  const Schema schema = DatasetSchema(dataset);
  for (const UploadVariant& u : uploads) u.replicas.Validate(schema);
}

std::vector<std::string> ScenarioNames() { return {"bob", "synthetic", "replication", "failover"}; }

BenchScenario MakeScenario(const std::string& name, const BenchParams& p) {
  BenchScenario s;
  s.name = name;
  s.rows_per_node = p.rows_per_node;
  s.repetitions = p.repetitions;
  s.seed = p.seed;
  s.cluster.datanodes = p.datanodes;
  s.cluster.map_slots = p.map_slots;
  s.cluster.block_size = p.block_size;
  s.cluster.partition_size = p.partition_size;
  s.cluster.expiry = p.expiry;
  s.cluster.storage_root = p.work_dir / name / "cluster";
  const uint64_t n = p.partition_size;
  if (name == "bob") {
    s.dataset = Dataset::kUserVisits;
    s.uploads = {{"0idx", Replicas({0, 0, 0}, n)},
                 {"1idx", Replicas({3, 0, 0}, n)},
                 {"2idx", Replicas({3, 1, 0}, n)},
                 {"3idx", Replicas({3, 1, 4}, n)}};
    s.query_upload = 3;
    s.queries = BobQueries();
  } else if (name == "synthetic") {
    s.dataset = Dataset::kSynthetic;
    s.uploads = {{"0idx", Replicas({0, 0, 0}, n)},
                 {"1idx", Replicas({1, 0, 0}, n)},
                 {"2idx", Replicas({1, 2, 0}, n)},
                 {"3idx", Replicas({1, 2, 3}, n)}};
    s.query_upload = 3;
    s.queries = SyntheticQueries();
  } else if (name == "replication") {
    s.dataset = Dataset::kSynthetic;
    s.cluster.datanodes = std::max(p.datanodes, 6);
    for (int r = 3; r <= 6; ++r) {
      std::vector<int> keys(r);
      std::iota(keys.begin(), keys.end(), 1);
      s.uploads.push_back({"r" + std::to_string(r), Replicas(keys, n)});
    }
  } else if (name == "failover") {
    s.dataset = Dataset::kUserVisits;
    s.cluster.datanodes = 5;
    s.uploads = {{"HAIL", Replicas({3, 1, 4}, n)}, {"HAIL-1Idx", Replicas({3, 3, 3}, n)}};
    s.queries = {BobQueries().front()};
    s.failover_fraction = p.kill_fraction;
  } else {
    Throw(ErrorCode::kInvalidArgument, "unknown scenario " + name + " (bob, synthetic, replication, failover)");
  }
  s.cluster.replication = s.uploads.front().replicas.replication;
  return s;
}

const std::vector<std::string>& BenchColumns() { return kColumns; }

void BenchRow::Set(const std::string& column, const std::string& value) {
  if (std::find(kColumns.begin(), kColumns.end(), column) == kColumns.end()) {
    Throw(ErrorCode::kInvalidArgument, "unknown report column " + column);
  }
  cells[column] = value;
}

void BenchRow::Set(const std::string& column, double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  Set(column, std::string(buf));
}

void BenchRow::Set(const std::string& column, uint64_t value) { Set(column, std::to_string(value)); }

const std::string& BenchRow::Get(const std::string& column) const {
  static const std::string kEmpty;
  auto it = cells.find(column);
  return it == cells.end() ? kEmpty : it->second;
}

BenchReport RunScenario(const BenchScenario& s) {
  s.Validate();
  const std::filesystem::path dir = s.cluster.storage_root.parent_path();
  const Schema schema = DatasetSchema(s.dataset);
  const uint64_t rows = s.rows_per_node * static_cast<uint64_t>(s.cluster.datanodes);
  const std::filesystem::path input = dir / "input.txt";
  Step("generate", [&] {
    std::filesystem::remove_all(s.cluster.storage_root);
    std::filesystem::create_directories(dir);
    GenerateToFile(std::string(DatasetName(s.dataset)), input, rows, s.seed);
  });
  Cluster cluster(s.cluster);
  BenchReport report;

  std::vector<std::string> first_upload;
  for (size_t v = 0; v < s.uploads.size(); ++v) {
    const UploadVariant& u = s.uploads[v];
    std::vector<double> times;
    uint64_t blocks = 0;
    for (int rep = 0; rep < s.repetitions; ++rep) {
      const std::string file = s.name + "_" + u.label + "_" + std::to_string(rep);
      const UploadReport up = Step("upload " + file, [&] { return cluster.UploadFile(file, input, schema, u.replicas); });
      times.push_back(up.wall_seconds);
      blocks = up.blocks;
      if (rep == 0) first_upload.push_back(file);
    }
    BenchRow row = BaseRow(s, "upload", u.label, u.replicas);
    row.Set("rows", rows);
    row.Set("blocks", blocks);
    row.Set("upload_seconds", Mean(times));
    report.rows.push_back(std::move(row));
  }

  auto run = [&](const std::string& file, const NamedQuery& q, SplittingPolicy policy, bool full_scan) {
    QueryRuns runs;
    const QueryAnnotation annotation = ParseAnnotation(q.annotation);
    for (int rep = 0; rep < s.repetitions; ++rep) {
      JobOptions opt;
      opt.splitting = policy;
      opt.force_full_scan = full_scan;
      opt.seed = s.seed + static_cast<uint64_t>(rep);
      const JobResult r = Step("query " + q.name, [&] { return RunJob(cluster, file, annotation, opt); });
      runs.end_to_end.push_back(r.metrics.t_end_to_end);
      runs.record_reader.push_back(r.metrics.avg_record_reader());
      runs.overhead.push_back(r.metrics.t_overhead);
      runs.map_tasks = r.metrics.map_task_count;
      runs.records = r.records + r.bad_records;
      const std::string digest = MultisetDigest(r.output);
      if (rep > 0 && digest != runs.digest) {
        report.mismatches.push_back(q.name + ": repetition " + std::to_string(rep) + " result differs");
      }
      runs.digest = digest;
    }
    return runs;
  };

  if (s.query_upload && !s.failover_fraction) {
    const UploadVariant& u = s.uploads[*s.query_upload];
    const std::string& file = first_upload[*s.query_upload];
    for (const NamedQuery& q : s.queries) {
      const QueryRuns full = run(file, q, SplittingPolicy::kDefault, true);
      const QueryRuns def = run(file, q, SplittingPolicy::kDefault, false);
      const QueryRuns hail = run(file, q, SplittingPolicy::kHail, false);
      const bool equivalent = full.digest == def.digest && full.digest == hail.digest;
      if (!equivalent) report.mismatches.push_back(q.name + ": index-scan and full-scan results differ");
      BenchRow row = BaseRow(s, "query", q.name, u.replicas);
      row.Set("rows", rows);
      row.Set("fullscan_end_to_end", Mean(full.end_to_end));
      row.Set("fullscan_record_reader", Mean(full.record_reader));
      row.Set("default_end_to_end", Mean(def.end_to_end));
      row.Set("default_record_reader", Mean(def.record_reader));
      row.Set("default_overhead", Mean(def.overhead));
      row.Set("default_map_tasks", def.map_tasks);
      row.Set("hail_end_to_end", Mean(hail.end_to_end));
      row.Set("hail_record_reader", Mean(hail.record_reader));
      row.Set("hail_overhead", Mean(hail.overhead));
      row.Set("hail_map_tasks", hail.map_tasks);
      row.Set("result_rows", full.records);
      row.Set("selectivity", rows == 0 ? 0.0 : static_cast<double>(full.records) / static_cast<double>(rows));
      row.Set("result_digest", full.digest);
      row.Set("equivalent", equivalent ? 1 : 0);
      report.rows.push_back(std::move(row));
    }
  }

  if (s.failover_fraction) {
    const NamedQuery& q = s.queries.front();
    const QueryAnnotation annotation = ParseAnnotation(q.annotation);
    for (size_t v = 0; v < s.uploads.size(); ++v) {
      const std::string& file = first_upload[v];
      const QueryRuns full = run(file, q, SplittingPolicy::kDefault, true);
      std::vector<double> baseline, failure;
      int rescheduled = 0, rescheduled_index = 0;
      bool equivalent = true;
      for (int rep = 0; rep < s.repetitions; ++rep) {
        JobOptions opt;
        opt.seed = s.seed + static_cast<uint64_t>(rep);
        const JobResult b = Step("failover baseline", [&] { return RunJob(cluster, file, annotation, opt); });
        opt.kill_at_fraction = *s.failover_fraction;
        const JobResult f = Step("failover run", [&] { return RunJob(cluster, file, annotation, opt); });
        if (f.metrics.killed_node != 0) cluster.ReviveNode(f.metrics.killed_node);
        baseline.push_back(b.metrics.t_end_to_end);
        failure.push_back(f.metrics.t_end_to_end);
        rescheduled += f.metrics.rescheduled_tasks;
        rescheduled_index += f.metrics.rescheduled_index_scans;
        if (MultisetDigest(b.output) != full.digest || MultisetDigest(f.output) != full.digest) equivalent = false;
      }
      if (!equivalent) report.mismatches.push_back(s.uploads[v].label + ": failover results differ from full scan");
      BenchRow row = BaseRow(s, "failover", s.uploads[v].label, s.uploads[v].replicas);
      row.Set("rows", rows);
      row.Set("baseline_seconds", Mean(baseline));
      row.Set("failure_seconds", Mean(failure));
      row.Set("slowdown", Slowdown(Mean(baseline), Mean(failure)));
      row.Set("rescheduled_tasks", rescheduled);
      row.Set("rescheduled_index_scans", rescheduled_index);
      row.Set("result_rows", full.records);
      row.Set("result_digest", full.digest);
      row.Set("equivalent", equivalent ? 1 : 0);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

void WriteCsv(const std::filesystem::path& path, const std::vector<BenchRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  for (size_t i = 0; i < kColumns.size(); ++i) out << (i ? "," : "") << kColumns[i];
  out << '\n';
  for (const BenchRow& r : rows) {
    for (size_t i = 0; i < kColumns.size(); ++i) out << (i ? "," : "") << r.Get(kColumns[i]);
    out << '\n';
  }
  if (!out) Throw(ErrorCode::kIoError, "cannot write " + path.string());
}

void WriteDat(const std::filesystem::path& path, const std::vector<BenchRow>& rows) {
  struct Block {
    std::string kind;
    std::vector<std::string> columns;
  };
  const std::vector<Block> blocks = {
      {"upload", {"label", "replication", "upload_seconds"}},
      {"query",
       {"label", "fullscan_end_to_end", "default_end_to_end", "hail_end_to_end", "fullscan_record_reader",
        "default_record_reader", "hail_record_reader", "default_map_tasks", "hail_map_tasks"}},
      {"failover", {"label", "baseline_seconds", "failure_seconds", "slowdown"}},
  };
  std::ofstream out(path, std::ios::trunc);
  for (size_t b = 0; b < blocks.size(); ++b) {
    if (b > 0) out << "\n\n";
    out << "# " << blocks[b].kind << ":";
    for (const std::string& c : blocks[b].columns) out << ' ' << c;
    out << '\n';
    for (const BenchRow& r : rows) {
      if (r.Get("kind") != blocks[b].kind) continue;
      for (size_t i = 0; i < blocks[b].columns.size(); ++i) {
        const std::string& v = r.Get(blocks[b].columns[i]);
        if (i > 0) out << ' ';
        if (i == 0) {
          out << '"' << r.Get("scenario") << '/' << v << '"';
        } else {
          out << (v.empty() ? "NaN" : v);
        }
      }
      out << '\n';
    }
  }
  if (!out) Throw(ErrorCode::kIoError, "cannot write " + path.string());
}

void CheckReport(const BenchReport& report) {
  if (report.mismatches.empty()) return;
  std::string msg = "equivalence check failed:";
  for (const std::string& m : report.mismatches) msg += " [" + m + "]";
  Throw(ErrorCode::kScenarioFailed, msg);
}

}  // namespace hail
