#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hail/annotation.h"
#include "hail/cluster.h"
#include "hail/record_reader.h"
#include "hail/splitting.h"

namespace hail {

// Map function over one reader item: either a projected record or, with
// `bad` set, the raw text of a bad record. Emits output lines.
using MapFn = std::function<void(const Record* record, const std::string* bad, std::vector<std::string>& out)>;

// Projected values joined by the schema delimiter; bad records verbatim.
MapFn IdentityMap(const BoundQuery& query);

struct JobOptions {
  SplittingPolicy splitting = SplittingPolicy::kHail;
  bool force_full_scan = false;
  MapFn map;  // defaults to IdentityMap
  std::function<std::vector<std::string>(std::vector<std::string>)> reduce;
  // Kill one busy datanode once this fraction of map tasks has finished.
  std::optional<double> kill_at_fraction;
  uint64_t seed = 1;
  int max_attempts = 4;
};

struct TaskRecord {
  int split = 0;
  int attempt = 0;
  int node = 0;
  ScanMode planned = ScanMode::kFullScan;
  bool failed = false;
  bool rescheduled = false;  // a retry of a failed attempt
  double record_reader_seconds = 0;
  std::vector<BlockScan> scans;

  bool all_index_scans() const;
};

struct JobMetrics {
  double t_end_to_end = 0;
  double t_ideal = 0;
  double t_overhead = 0;
  std::vector<double> record_reader_times;  // successful attempts
  int map_task_count = 0;
  int parallel_map_slots = 0;
  int failed_attempts = 0;
  int rescheduled_tasks = 0;
  int rescheduled_index_scans = 0;
  int killed_node = 0;
  int index_attribute = 0;
  uint64_t bytes_read = 0;

  double avg_record_reader() const;
};

struct JobResult {
  std::vector<std::string> output;
  uint64_t records = 0;
  uint64_t bad_records = 0;
  JobMetrics metrics;
  std::vector<TaskRecord> tasks;
};

// Split, schedule, read and map one uploaded file. Throws JOB_FAILED when a
// block has no readable replica, NO_ALIVE_NODES when nothing can run.
JobResult RunJob(Cluster& cluster, const std::string& file, const QueryAnnotation& query, const JobOptions& options);

double Slowdown(double t_baseline, double t_failure);

// Order-insensitive digest of output lines: count plus CRC32C of the sorted lines.
std::string MultisetDigest(std::vector<std::string> lines);

void WriteMetrics(const std::filesystem::path& path, const JobMetrics& metrics);
void WriteOutput(const std::filesystem::path& path, const std::vector<std::string>& lines);

}  // namespace hail
