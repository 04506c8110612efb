// hail: generate datasets, upload them into a local cluster, run annotated
// queries and benchmark scenarios, kill or revive datanodes, dump blocks.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "hail/bench.h"
#include "hail/cluster.h"
#include "hail/datagen.h"
#include "hail/error.h"
#include "hail/job.h"
#include "hail/replica_file.h"

namespace {

using namespace hail;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitScenario = 3;

struct Globals {
  std::string cluster_config;
  std::string schema;
  uint64_t seed = 1;
  std::string splitting = "hail";
  std::string filter;
  std::string projection;
  int replication = 0;
  std::string sort_keys;
};

ClusterConfig LoadCluster(const Globals& g) {
  if (g.cluster_config.empty()) {
    ClusterConfig c;
    c.storage_root = "hail_data";
    return c;
  }
  return ClusterConfig::Load(g.cluster_config);
}

Schema LoadSchema(const std::string& source) {
  if (source == "uservisits") return UserVisitsSchema();
  if (source == "synthetic") return SyntheticSchema();
  if (source.empty()) Throw(ErrorCode::kInvalidArgument, "--schema is required (a file, uservisits or synthetic)");
  std::ifstream in(source);
  if (!in) Throw(ErrorCode::kInvalidArgument, "cannot read schema " + source);
  std::stringstream text;
  text << in.rdbuf();
  return Schema::FromConfig(text.str());
}

ReplicaConfig ReplicasFor(const Globals& g, const ClusterConfig& c, const Schema& schema) {
  ReplicaConfig r = ReplicaConfig::FromCluster(c);
  if (g.replication > 0) r.replication = g.replication;
  if (!g.sort_keys.empty()) r.sort_keys = ParseSortKeys(g.sort_keys, &schema);
  if (g.replication > 0 && g.sort_keys.empty() && r.sort_keys.size() != static_cast<size_t>(r.replication)) {
    r.sort_keys.clear();
  }
  r.Validate(schema);
  return r;
}

SplittingPolicy ParseSplitting(const std::string& s) {
  if (s == "hail") return SplittingPolicy::kHail;
  if (s == "default") return SplittingPolicy::kDefault;
  Throw(ErrorCode::kInvalidArgument, "--splitting must be hail or default");
}

void PrintHeader(const BlockHeader& h, std::ostream& out) {
  out << "version=" << h.version << "\n"
      << "header_length=" << h.header_length << "\n"
      << "row_count=" << h.row_count << "\n"
      << "file_size=" << h.file_size() << "\n"
      << "delimiter=" << h.schema.delimiter() << "\n";
  for (const Attribute& a : h.schema.attributes()) {
    const Extent& e = h.column(a.position);
    out << "column @" << a.position << " " << a.name << " " << TypeName(a.type) << " offset=" << e.offset
        << " length=" << e.length << "\n";
  }
  out << "bad_region offset=" << h.bad_region.offset << " length=" << h.bad_region.length
      << " count=" << h.bad_count << "\n"
      << "index_section offset=" << h.index_section.offset << " length=" << h.index_section.length << "\n";
}

void PrintIndex(const std::optional<IndexSection>& section, std::ostream& out) {
  if (!section) {
    out << "index=none\n";
    return;
  }
  const SparseClusteredIndex& idx = section->index;
  const IndexMetadata meta = DescribeIndexSection(*section);
  out << "index=sparse_clustered\n"
      << "index.key=@" << idx.key_position << " " << TypeName(idx.key_type) << "\n"
      << "index.partition_size=" << idx.partition_size << "\n"
      << "index.partition_count=" << idx.partition_count() << "\n"
      << "index.root_entries=" << idx.root.size() << "\n"
      << "index.root_offset=" << meta.root_offset << "\n"
      << "index.root_length=" << meta.root_length << "\n";
  if (!idx.root.empty()) {
    uint8_t raw[8];
    RawFromOrderedKey(idx.key_type, idx.root.front(), raw);
    out << "index.min_key=" << FormatValue(idx.key_type, DecodeFixed(idx.key_type, raw)) << "\n";
    RawFromOrderedKey(idx.key_type, idx.max_key, raw);
    out << "index.max_key=" << FormatValue(idx.key_type, DecodeFixed(idx.key_type, raw)) << "\n";
  }
  for (const IndexMetadata::VarList& v : meta.var_lists) {
    out << "index.var_offsets @" << v.position << " offset=" << v.offset << " length=" << v.length << "\n";
  }
}

int Run(int argc, char** argv) {
  CLI::App app{"HAIL block store: upload-time indexing and index-aware jobs"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--cluster-config", g.cluster_config, "cluster config file");
  app.add_option("--schema", g.schema, "schema config file, or uservisits / synthetic");
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--splitting", g.splitting, "input splitting policy")->check(CLI::IsMember({"hail", "default"}));
  app.add_option("--filter", g.filter, "conjunctive filter, e.g. '@3 between(1999-01-01,2000-01-01)'");
  app.add_option("--projection", g.projection, "projected attributes, e.g. '@1,@4'");
  app.add_option("--replication", g.replication, "replication factor")->check(CLI::PositiveNumber);
  app.add_option("--sort-keys", g.sort_keys, "per-replica sort keys, e.g. '3,1,NONE'");
  app.fallthrough();

  auto* gen = app.add_subcommand("gen", "generate a dataset");
  std::string dataset = "uservisits", gen_out;
  uint64_t gen_rows = 0;
  gen->add_option("--dataset", dataset)->check(CLI::IsMember({"uservisits", "synthetic"}));
  gen->add_option("--rows", gen_rows)->required();
  gen->add_option("--out", gen_out)->required();

  auto* upload = app.add_subcommand("upload", "upload a text file as indexed PAX blocks");
  std::string up_input, up_name;
  upload->add_option("--input", up_input)->required()->check(CLI::ExistingFile);
  upload->add_option("--name", up_name)->required();

  auto* query = app.add_subcommand("query", "run an annotated map-only job");
  std::string q_name, q_annotation, q_out, q_metrics;
  bool q_full = false;
  query->add_option("--name", q_name)->required();
  query->add_option("--annotation", q_annotation, "@HailQuery(filter=..., projection={...}) text");
  query->add_option("--out", q_out, "result file (default <name>.out)");
  query->add_option("--metrics", q_metrics, "metrics file (default <out>.metrics)");
  query->add_flag("--full-scan", q_full, "ignore indexes");

  auto* bench = app.add_subcommand("bench", "run benchmark scenarios");
  BenchParams params;
  std::string scenario = "bob", csv = "bench.csv", dat;
  uint64_t expiry_ms = params.expiry.count();
  bench->add_option("--scenario", scenario)->check(CLI::IsMember({"bob", "synthetic", "replication", "failover", "all"}));
  bench->add_option("--rows-per-node", params.rows_per_node);
  bench->add_option("--datanodes", params.datanodes)->check(CLI::PositiveNumber);
  bench->add_option("--map-slots", params.map_slots)->check(CLI::PositiveNumber);
  bench->add_option("--repetitions", params.repetitions)->check(CLI::PositiveNumber);
  bench->add_option("--block-size", params.block_size)->check(CLI::PositiveNumber);
  bench->add_option("--partition-size", params.partition_size)->check(CLI::PositiveNumber);
  bench->add_option("--kill-fraction", params.kill_fraction)->check(CLI::Range(0.0, 1.0));
  bench->add_option("--expiry-ms", expiry_ms);
  bench->add_option("--work-dir", params.work_dir);
  bench->add_option("--csv", csv);
  bench->add_option("--dat", dat, "gnuplot data file (default <csv>.dat)");

  auto* kill = app.add_subcommand("kill", "mark a datanode dead (persists across runs)");
  int kill_node = 0;
  bool revive = false;
  kill->add_option("--node", kill_node)->required()->check(CLI::PositiveNumber);
  kill->add_flag("--revive", revive);

  auto* inspect = app.add_subcommand("inspect", "dump a block header and its index metadata");
  std::string in_path, in_name;
  uint64_t in_block = 0;
  int in_node = 0;
  inspect->add_option("--path", in_path, "block file")->check(CLI::ExistingFile);
  inspect->add_option("--name", in_name, "uploaded file");
  inspect->add_option("--block", in_block);
  inspect->add_option("--node", in_node);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (*gen) {
    GenerateToFile(dataset, gen_out, gen_rows, g.seed);
    std::cout << "wrote " << gen_rows << " rows to " << gen_out << "\n";
  } else if (*upload) {
    ClusterConfig config = LoadCluster(g);
    const Schema schema = LoadSchema(g.schema);
    const ReplicaConfig replicas = ReplicasFor(g, config, schema);
    Cluster cluster(config);
    const UploadReport r = cluster.UploadFile(up_name, up_input, schema, replicas);
    std::cout << "file=" << r.file << "\nblocks=" << r.blocks << "\nrows=" << r.rows
              << "\nbad_records=" << r.bad_records << "\ninput_bytes=" << r.input_bytes
              << "\nbytes_sent=" << r.bytes_sent << "\nwall_seconds=" << r.wall_seconds << "\n";
  } else if (*query) {
    Cluster cluster(LoadCluster(g));
    const QueryAnnotation annotation =
        q_annotation.empty() ? AnnotationFromFlags(g.filter, g.projection) : ParseAnnotation(q_annotation);
    JobOptions opt;
    opt.splitting = ParseSplitting(g.splitting);
    opt.force_full_scan = q_full;
    opt.seed = g.seed;
    const JobResult r = RunJob(cluster, q_name, annotation, opt);
    const std::string out = q_out.empty() ? q_name + ".out" : q_out;
    WriteOutput(out, r.output);
    WriteMetrics(q_metrics.empty() ? out + ".metrics" : q_metrics, r.metrics);
    std::cout << "records=" << r.records << "\nbad_records=" << r.bad_records
              << "\nmap_tasks=" << r.metrics.map_task_count << "\nt_end_to_end=" << r.metrics.t_end_to_end
              << "\ndigest=" << MultisetDigest(r.output) << "\nout=" << out << "\n";
  } else if (*bench) {
    params.seed = g.seed;
    params.expiry = std::chrono::milliseconds(expiry_ms);
    const std::vector<std::string> names =
        scenario == "all" ? ScenarioNames() : std::vector<std::string>{scenario};
    std::vector<BenchRow> rows;
    std::vector<std::string> mismatches;
    std::optional<HailError> failure;
    for (const std::string& n : names) {
      try {
        std::cerr << "scenario " << n << "\n";
        BenchReport report = RunScenario(MakeScenario(n, params));
        rows.insert(rows.end(), report.rows.begin(), report.rows.end());
        mismatches.insert(mismatches.end(), report.mismatches.begin(), report.mismatches.end());
      } catch (const HailError& e) {
        if (e.code() != ErrorCode::kScenarioFailed) throw;
        failure = e;
        break;
      }
    }
    WriteCsv(csv, rows);
    WriteDat(dat.empty() ? csv + ".dat" : dat, rows);
    std::cout << "wrote " << rows.size() << " rows to " << csv << "\n";
    if (failure) throw *failure;
    CheckReport({rows, mismatches});
  } else if (*kill) {
    Cluster cluster(LoadCluster(g));
    if (revive) {
      cluster.ReviveNode(kill_node, true);
    } else {
      cluster.KillNode(kill_node, true);
    }
    std::cout << "datanode " << kill_node << (revive ? " revived" : " killed") << "\n";
  } else if (*inspect) {
    std::filesystem::path path = in_path;
    if (path.empty()) {
      if (in_name.empty() || in_node == 0) {
        std::cerr << "inspect needs --path, or --name, --block and --node\n";
        return kExitUsage;
      }
      ClusterConfig config = LoadCluster(g);
      Cluster cluster(config);
      path = cluster.ReplicaPath({in_name, in_block}, in_node);
    }
    ReplicaFile file(path);
    std::cout << "path=" << path.string() << "\n";
    PrintHeader(file.header(), std::cout);
    PrintIndex(file.index(), std::cout);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return Run(argc, argv);
  } catch (const HailError& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::kScenarioFailed:
        return kExitScenario;
      case ErrorCode::kInvalidArgument:
      case ErrorCode::kSyntaxError:
      case ErrorCode::kUnknownAttribute:
        return kExitUsage;
      default:
        return kExitFailure;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
