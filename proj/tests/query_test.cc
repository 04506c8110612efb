#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <thread>

#include "hail/annotation.h"
#include "hail/cluster.h"
#include "hail/datagen.h"
#include "hail/error.h"
#include "hail/index.h"
#include "hail/job.h"
#include "hail/record_reader.h"
#include "hail/splitting.h"
#include "test_util.h"

namespace hail {
namespace {

using namespace std::chrono_literals;

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const HailError& e) {
    return e.code();
  }
  return static_cast<ErrorCode>(-1);
}

std::string Text(const std::vector<Record>& rows, const Schema& s) {
  std::string out;
  for (const Record& r : rows) out += FormatRecord(r, s) + "\n";
  return out;
}

std::vector<std::string> Sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

TEST(Annotation, ParsesFilterAndProjection) {
  const QueryAnnotation q =
      ParseAnnotation("@HailQuery(filter=\"@3 between(1999-01-01,2000-01-01)\", projection={@1})");
  ASSERT_EQ(q.filter.size(), 1u);
  EXPECT_EQ(q.filter[0], (FilterTerm{3, FilterOp::kBetween, {"1999-01-01", "2000-01-01"}}));
  EXPECT_EQ(q.projection, (std::vector<int>{1}));

  const QueryAnnotation eq = ParseAnnotation("filter=\"@1 =('172.101.11.46') and @3 =(1992-12-22)\"");
  ASSERT_EQ(eq.filter.size(), 2u);
  EXPECT_EQ(eq.filter[0].args, (std::vector<std::string>{"172.101.11.46"}));
  EXPECT_EQ(eq.filter[1].position, 3);
  EXPECT_TRUE(eq.projection.empty());

  const QueryAnnotation range = ParseAnnotation("projection={@8,@9,@4}, filter=\"@4 >=(1) and @4 <=(10)\"");
  EXPECT_EQ(range.projection, (std::vector<int>{8, 9, 4}));
  EXPECT_EQ(range.filter[0].op, FilterOp::kGe);
  EXPECT_EQ(range.filter[1].op, FilterOp::kLe);
  EXPECT_EQ(ParseAnnotation(FormatAnnotation(range)), range);
  EXPECT_EQ(AnnotationFromFlags("@4 >=(1) and @4 <=(10)", "@8,@9,@4"), range);
  EXPECT_EQ(ParseAnnotation(""), QueryAnnotation{});

  // Quoted literals may contain commas and the keyword.
  const QueryAnnotation quoted = ParseAnnotation("filter=\"@2 =('a, and b')\"");
  EXPECT_EQ(quoted.filter[0].args, (std::vector<std::string>{"a, and b"}));
}

TEST(Annotation, SyntaxErrors) {
  for (const char* bad : {"filter=\"@3 between(1)\"", "filter=\"3 =(1)\"", "filter=\"@3 <(1)\"",
                          "filter=\"@3 =(1\"", "projection={@1", "select=\"@1 =(1)\"", "filter=@1 =(1)",
                          "@HailQuery(filter=\"@1 =(1)\"", "filter=\"@1 =('x)\""}) {
    EXPECT_EQ(CodeOf([&] { ParseAnnotation(bad); }), ErrorCode::kSyntaxError) << bad;
  }
}

TEST(Annotation, BindChecksAttributesAndLiterals) {
  const Schema uv = UserVisitsSchema();
  EXPECT_EQ(CodeOf([&] { Bind(ParseAnnotation("filter=\"@10 =(1)\""), uv); }), ErrorCode::kUnknownAttribute);
  EXPECT_EQ(CodeOf([&] { Bind(ParseAnnotation("projection={@0}"), uv); }), ErrorCode::kUnknownAttribute);
  EXPECT_EQ(CodeOf([&] { Bind(ParseAnnotation("filter=\"@3 =(1999-02-30)\""), uv); }), ErrorCode::kSyntaxError);
  EXPECT_EQ(CodeOf([&] { Bind(ParseAnnotation("filter=\"@9 between(5,1)\""), uv); }), ErrorCode::kSyntaxError);
  const BoundQuery all = Bind(QueryAnnotation{}, uv);
  EXPECT_EQ(all.projection.size(), 9u);
  EXPECT_FALSE(all.has_filter());

  // Conjuncts on one attribute intersect.
  const BoundQuery q = Bind(ParseAnnotation("filter=\"@4 >=(1) and @4 <=(10) and @4 >=(2)\""), uv);
  ASSERT_EQ(q.conjuncts.size(), 1u);
  EXPECT_EQ(*q.conjuncts[0].lo, Value(2.0));
  EXPECT_EQ(*q.conjuncts[0].hi, Value(10.0));
  EXPECT_EQ(q.conjuncts[0].key_lo(), OrderedKey(Value(2.0)));
}

// Namenode with `blocks` blocks of file "f", every replica indexed on @1 and
// the r replicas of block b placed on nodes listed by `place`.
std::unique_ptr<Namenode> Directory(int datanodes, uint64_t blocks,
                                    const std::function<std::vector<int>(uint64_t)>& place, int indexed = 1) {
  auto nn = std::make_unique<Namenode>(datanodes, 100ms);
  for (uint64_t b = 0; b < blocks; ++b) {
    const auto hosts = place(b);
    nn->ExpectReplicas({"f", b}, static_cast<int>(hosts.size()));
    for (int h : hosts) {
      ReplicaInfo info;
      info.datanode = h;
      info.indexed_attribute = indexed;
      info.sort_key = indexed;
      nn->RegisterReplica({"f", b}, info);
    }
  }
  return nn;
}

std::vector<BlockId> Blocks(uint64_t n) {
  std::vector<BlockId> out;
  for (uint64_t b = 0; b < n; ++b) out.push_back({"f", b});
  return out;
}

void ExpectPartition(const std::vector<InputSplit>& splits, uint64_t blocks) {
  std::multiset<uint64_t> seen;
  for (const InputSplit& s : splits) {
    for (const BlockRef& r : s.blocks) seen.insert(r.block.index);
  }
  ASSERT_EQ(seen.size(), blocks);
  EXPECT_EQ(std::set<uint64_t>(seen.begin(), seen.end()).size(), blocks);
}

TEST(Splitting, IndexedFileCollapsesToSlotsPerNode) {
  const auto dir = Directory(10, 160, [](uint64_t b) {
    return std::vector<int>{static_cast<int>(b % 10) + 1, static_cast<int>((b + 3) % 10) + 1,
                            static_cast<int>((b + 6) % 10) + 1};
  });
  const Namenode& nn = *dir;
  const auto splits = HailSplitting(nn, Blocks(160), 1, 2);
  EXPECT_LE(splits.size(), 20u);
  ExpectPartition(splits, 160);
  for (const InputSplit& s : splits) {
    EXPECT_EQ(s.mode, ScanMode::kIndexScan);
    for (const BlockRef& r : s.blocks) {
      EXPECT_EQ(r.target, s.blocks.front().target);
      EXPECT_EQ(nn.Replica(r.block, r.target)->indexed_attribute, 1);
    }
  }
  EXPECT_EQ(DefaultSplitting(nn, Blocks(160), 1).size(), 160u);
}

TEST(Splitting, WithoutIndexOneSplitPerBlock) {
  const auto dir = Directory(4, 37, [](uint64_t b) { return std::vector<int>{static_cast<int>(b % 4) + 1}; }, 0);
  const Namenode& nn = *dir;
  const auto splits = HailSplitting(nn, Blocks(37), 0, 2);
  EXPECT_EQ(splits.size(), 37u);
  ExpectPartition(splits, 37);
  for (const InputSplit& s : splits) EXPECT_EQ(s.mode, ScanMode::kFullScan);
}

TEST(Splitting, SingleHostGetsMapSlotSplits) {
  const auto dir = Directory(5, 40, [](uint64_t) { return std::vector<int>{3}; });
  const Namenode& nn = *dir;
  const auto splits = HailSplitting(nn, Blocks(40), 1, 2);
  ASSERT_EQ(splits.size(), 2u);
  EXPECT_EQ(splits[0].blocks.size(), 20u);
  EXPECT_EQ(splits[1].blocks.size(), 20u);
  ExpectPartition(splits, 40);
  EXPECT_EQ(HailSplitting(nn, Blocks(1), 1, 2).size(), 1u);
}

TEST(Splitting, ChooseIndexAttributeFollowsConjunctOrder) {
  Namenode nn(3, 100ms);
  nn.ExpectReplicas({"f", 0}, 2);
  ReplicaInfo a;
  a.datanode = 1;
  a.indexed_attribute = 4;
  nn.RegisterReplica({"f", 0}, a);
  a.datanode = 2;
  a.indexed_attribute = 3;
  nn.RegisterReplica({"f", 0}, a);
  const Schema uv = UserVisitsSchema();
  EXPECT_EQ(ChooseIndexAttribute(nn, Blocks(1), Bind(ParseAnnotation("filter=\"@3 =(2000-01-01) and @4 =(1)\""), uv)), 3);
  EXPECT_EQ(ChooseIndexAttribute(nn, Blocks(1), Bind(ParseAnnotation("filter=\"@4 =(1) and @3 =(2000-01-01)\""), uv)), 4);
  EXPECT_EQ(ChooseIndexAttribute(nn, Blocks(1), Bind(ParseAnnotation("filter=\"@9 =(1)\""), uv)), 0);
  EXPECT_EQ(ChooseIndexAttribute(nn, Blocks(1), Bind(QueryAnnotation{}, uv)), 0);
}

// Index scan and full scan of the same block return the same multiset,
// also with extra conjuncts on other attributes and bad records present.
TEST(RecordReader, IndexScanEqualsFullScan) {
  std::mt19937_64 rng(11);
  const Schema s = testing::MixedSchema();
  for (int trial = 0; trial < 80; ++trial) {
    const auto rows = testing::RandomRecords(s, 1 + rng() % 1500, rng, 1 + rng() % 100);
    const int key = std::vector<int>{1, 3, 4, 5, 6}[trial % 5];
    const PaxBlock plain = testing::MakeBlock(s, rows, {"bad line " + std::to_string(trial)});
    const PaxBlock indexed = SortAndIndex(plain, key, 1 + rng() % 100);
    QueryAnnotation q = testing::RandomQuery(s, rows, rng, key);
    if (trial % 3 == 0) {
      const QueryAnnotation extra = testing::RandomQuery(s, rows, rng);
      q.filter.insert(q.filter.end(), extra.filter.begin(), extra.filter.end());
    }
    const BoundQuery bq = Bind(q, s);
    ReaderOutput full, idx;
    FullScan(plain, bq, &full);
    PaxBlockSource src(indexed);
    IndexScan(src, bq, key, &idx);
    EXPECT_EQ(testing::Render(idx.records, bq), testing::Render(full.records, bq)) << FormatAnnotation(q);
    EXPECT_EQ(testing::Render(full.records, bq), testing::OracleQuery(q, s, rows)) << FormatAnnotation(q);
    EXPECT_EQ(idx.bad_records, plain.bad_rows());
    EXPECT_EQ(full.bad_records, plain.bad_rows());
  }
}

class JobTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ClusterConfig c;
    c.datanodes = 4;
    c.map_slots = 2;
    c.block_size = 24 * 1024;
    c.expiry = 100ms;
    c.storage_root = dir_.path();
    cluster_ = std::make_unique<Cluster>(c);
    std::mt19937_64 rng(12);
    rows_ = testing::RandomRecords(schema_, 4000, rng, 300);
    std::istringstream in(Text(rows_, schema_));
    ReplicaConfig r;
    r.replication = 3;
    r.sort_keys = {1, 5, 0};
    r.partition_size = 64;
    cluster_->Upload("mixed", in, schema_, r);
  }

  std::vector<std::string> Run(const QueryAnnotation& q, SplittingPolicy policy, bool full = false,
                               JobMetrics* metrics = nullptr) {
    JobOptions o;
    o.splitting = policy;
    o.force_full_scan = full;
    JobResult res = RunJob(*cluster_, "mixed", q, o);
    if (metrics != nullptr) *metrics = res.metrics;
    return Sorted(res.output);
  }

  testing::TempDir dir_;
  Schema schema_ = testing::MixedSchema();
  std::vector<Record> rows_;
  std::unique_ptr<Cluster> cluster_;
};

TEST_F(JobTest, PoliciesAgreeWithOracle) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const QueryAnnotation q = testing::RandomQuery(schema_, rows_, rng, std::vector<int>{1, 5, 3}[trial % 3]);
    const auto want = testing::OracleQuery(q, schema_, rows_);
    JobMetrics hail_m;
    EXPECT_EQ(Run(q, SplittingPolicy::kHail, false, &hail_m), want) << FormatAnnotation(q);
    EXPECT_EQ(Run(q, SplittingPolicy::kDefault), want) << FormatAnnotation(q);
    EXPECT_EQ(Run(q, SplittingPolicy::kDefault, true), want) << FormatAnnotation(q);
    const int pos = q.filter.front().position;
    EXPECT_EQ(hail_m.index_attribute, pos == 3 ? 0 : pos);
  }
}

TEST_F(JobTest, MetricIdentities) {
  JobMetrics hail_m, default_m;
  const QueryAnnotation q = ParseAnnotation("filter=\"@1 between(10,20)\", projection={@2,@1}");
  Run(q, SplittingPolicy::kHail, false, &hail_m);
  Run(q, SplittingPolicy::kDefault, false, &default_m);
  const auto blocks = cluster_->namenode().BlocksOf("mixed").size();
  EXPECT_EQ(default_m.map_task_count, static_cast<int>(blocks));
  EXPECT_LE(hail_m.map_task_count, 4 * 2);
  EXPECT_LT(hail_m.map_task_count, default_m.map_task_count);
  for (const JobMetrics& m : {hail_m, default_m}) {
    EXPECT_EQ(m.parallel_map_slots, 8);
    EXPECT_EQ(m.record_reader_times.size(), static_cast<size_t>(m.map_task_count));
    EXPECT_DOUBLE_EQ(m.t_ideal, static_cast<double>(m.map_task_count) / 8 * m.avg_record_reader());
    EXPECT_DOUBLE_EQ(m.t_overhead, m.t_end_to_end - m.t_ideal);
    EXPECT_EQ(m.failed_attempts, 0);
  }
  EXPECT_EQ(hail_m.index_attribute, 1);
}

TEST_F(JobTest, BadRecordsReachTheMapFunction) {
  testing::TempDir dir;
  ClusterConfig c = cluster_->config();
  c.storage_root = dir.path();
  Cluster cluster(c);
  std::istringstream in("1,a,1,1.5,2000-01-01,1.2.3.4,x\nnot a record\n2,b,2,2.5,2000-01-02,1.2.3.5,y\n");
  ReplicaConfig r;
  r.sort_keys = {1, 1, 1};
  cluster.Upload("small", in, schema_, r);
  JobOptions o;
  const JobResult res = RunJob(cluster, "small", ParseAnnotation("filter=\"@1 =(2)\", projection={@2}"), o);
  EXPECT_EQ(Sorted(res.output), (std::vector<std::string>{"b", "not a record"}));
  EXPECT_EQ(res.records, 1u);
  EXPECT_EQ(res.bad_records, 1u);
}

TEST_F(JobTest, UnknownFileAndAttribute) {
  EXPECT_EQ(CodeOf([&] { Run(ParseAnnotation("filter=\"@8 =(1)\""), SplittingPolicy::kHail); }),
            ErrorCode::kUnknownAttribute);
  JobOptions o;
  EXPECT_EQ(CodeOf([&] { RunJob(*cluster_, "missing", {}, o); }), ErrorCode::kInvalidArgument);
}

// A node killed mid-job: its tasks are rescheduled after the expiry
// interval and the result does not change.
TEST_F(JobTest, FailoverKeepsResults) {
  const QueryAnnotation q = ParseAnnotation("filter=\"@1 between(0,150)\"");
  const auto want = testing::OracleQuery(q, schema_, rows_);
  JobOptions o;
  o.kill_at_fraction = 0.5;
  o.seed = 3;
  const JobResult res = RunJob(*cluster_, "mixed", q, o);
  EXPECT_EQ(Sorted(res.output), want);
  ASSERT_NE(res.metrics.killed_node, 0);
  EXPECT_FALSE(cluster_->IsUp(res.metrics.killed_node));
  EXPECT_EQ(res.metrics.rescheduled_tasks, res.metrics.failed_attempts);
  for (const TaskRecord& t : res.tasks) {
    if (t.rescheduled && !t.failed) {
      EXPECT_NE(t.node, res.metrics.killed_node);
    }
  }
  cluster_->ReviveNode(res.metrics.killed_node);
  EXPECT_EQ(Run(q, SplittingPolicy::kHail), want);
}

// Every block on node 1 with one slot per node: tasks spill onto the other
// nodes and read their blocks remotely.
TEST_F(JobTest, SaturatedNodesRunRemoteTasks) {
  ClusterConfig c = cluster_->config();
  testing::TempDir dir;
  c.storage_root = dir.path();
  c.map_slots = 1;
  Cluster cluster(c);
  for (int d = 2; d <= 4; ++d) cluster.KillNode(d);
  std::this_thread::sleep_for(c.expiry + 50ms);
  std::istringstream in(Text(rows_, schema_));
  ReplicaConfig r;
  r.replication = 1;
  r.sort_keys = {0};
  cluster.Upload("one", in, schema_, r);
  for (int d = 2; d <= 4; ++d) cluster.ReviveNode(d);
  const auto blocks = cluster.namenode().BlocksOf("one");
  ASSERT_GT(blocks.size(), 2u);
  for (const BlockId& b : blocks) ASSERT_EQ(cluster.namenode().GetHosts(b), (std::vector<int>{1}));

  JobOptions o;
  o.splitting = SplittingPolicy::kDefault;
  const QueryAnnotation q = ParseAnnotation("filter=\"@1 between(0,99)\"");
  const JobResult res = RunJob(cluster, "one", q, o);
  EXPECT_EQ(Sorted(res.output), testing::OracleQuery(q, schema_, rows_));
  std::set<int> nodes;
  for (const TaskRecord& t : res.tasks) {
    nodes.insert(t.node);
    for (const BlockScan& s : t.scans) EXPECT_EQ(s.datanode, 1);
  }
  EXPECT_EQ(res.metrics.map_task_count, static_cast<int>(blocks.size()));
  EXPECT_GT(nodes.size(), 1u);
}

TEST(Slowdown, Formula) {
  EXPECT_DOUBLE_EQ(Slowdown(100, 110.5), 10.5);
  EXPECT_DOUBLE_EQ(Slowdown(2, 2), 0);
  EXPECT_THROW(Slowdown(0, 1), HailError);
  EXPECT_EQ(MultisetDigest({"b", "a"}), MultisetDigest({"a", "b"}));
  EXPECT_NE(MultisetDigest({"a", "a"}), MultisetDigest({"a"}));
  EXPECT_EQ(MultisetDigest({}).substr(0, 2), "0:");
}

}  // namespace
}  // namespace hail
