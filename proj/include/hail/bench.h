#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hail/cluster.h"
#include "hail/datagen.h"

namespace hail {

enum class Dataset { kUserVisits, kSynthetic };

std::string_view DatasetName(Dataset dataset);
Schema DatasetSchema(Dataset dataset);

struct UploadVariant {
  std::string label;
  ReplicaConfig replicas;
};

struct BenchScenario {
  std::string name;
  Dataset dataset = Dataset::kUserVisits;
  uint64_t rows_per_node = 20000;
  ClusterConfig cluster;
  std::vector<UploadVariant> uploads;
  // Variant whose first upload is queried; empty disables queries.
  std::optional<size_t> query_upload;
  std::vector<NamedQuery> queries;
  int repetitions = 3;
  // Failover runs: for every upload variant, the first query is run without
  // and with one datanode killed at this fraction of finished map tasks.
  std::optional<double> failover_fraction;
  uint64_t seed = 1;

  void Validate() const;
};

struct BenchParams {
  uint64_t rows_per_node = 20000;
  int datanodes = 4;
  int map_slots = 2;
  int repetitions = 3;
  uint64_t seed = 1;
  uint64_t block_size = 1 << 20;
  uint64_t partition_size = 1024;
  std::chrono::milliseconds expiry{500};
  double kill_fraction = 0.5;
  std::filesystem::path work_dir = "bench_work";
};

// bob, synthetic, replication, failover.
std::vector<std::string> ScenarioNames();
BenchScenario MakeScenario(const std::string& name, const BenchParams& params);

// Column order of the CSV report.
const std::vector<std::string>& BenchColumns();

struct BenchRow {
  std::map<std::string, std::string> cells;

  void Set(const std::string& column, const std::string& value);
  void Set(const std::string& column, double value);
  void Set(const std::string& column, uint64_t value);
  void Set(const std::string& column, int value) { Set(column, static_cast<uint64_t>(value)); }
  const std::string& Get(const std::string& column) const;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::vector<std::string> mismatches;  // empty when every equivalence check held
};

// Generates the dataset under `cluster.storage_root`, uploads every variant
// `repetitions` times, then runs queries and failover. Step errors surface
// as SCENARIO_FAILED naming the step.
BenchReport RunScenario(const BenchScenario& scenario);

void WriteCsv(const std::filesystem::path& path, const std::vector<BenchRow>& rows);
// Gnuplot data: blocks `upload`, `query`, `failover` separated by two blank lines;
// the first column is `scenario/label`.
void WriteDat(const std::filesystem::path& path, const std::vector<BenchRow>& rows);
// Throws SCENARIO_FAILED listing the mismatches, if any.
void CheckReport(const BenchReport& report);

}  // namespace hail
