#include "hail/job.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <thread>

#include "hail/channel.h"
#include "hail/checksum.h"
#include "hail/error.h"

namespace hail {

namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::duration d) { return std::chrono::duration<double>(d).count(); }

struct Pending {
  size_t split = 0;
  int attempt = 0;
  Clock::time_point not_before{};
  bool rescheduled = false;
};

struct Completion {
  TaskRecord record;
  Clock::time_point started{};
  std::vector<std::string> output;
  uint64_t records = 0;
  uint64_t bad_records = 0;
  std::string error;
};

Completion RunTask(Cluster& cluster, const BoundQuery& query, const InputSplit& split, int index_attribute,
                   const JobOptions& options, const MapFn& map, TaskRecord record) {
  Completion c;
  c.started = Clock::now();
  c.record = std::move(record);
  try {
    for (const BlockRef& ref : split.blocks) {
      if (!cluster.IsUp(c.record.node)) Throw(ErrorCode::kReadFailed, "task host is down");
      ReaderOutput out;
      const auto t0 = Clock::now();
      ReadBlock(cluster, query, {ref.block, ref.target, index_attribute, options.force_full_scan}, &out);
      c.record.record_reader_seconds += Seconds(Clock::now() - t0);
      c.record.scans.insert(c.record.scans.end(), out.scans.begin(), out.scans.end());
      for (const Record& r : out.records) map(&r, nullptr, c.output);
      for (const std::string& b : out.bad_records) map(nullptr, &b, c.output);
      c.records += out.records.size();
      c.bad_records += out.bad_records.size();
    }
    if (!cluster.IsUp(c.record.node)) Throw(ErrorCode::kReadFailed, "task host went down");
  } catch (const std::exception& e) {
    c.record.failed = true;
    c.error = e.what();
  }
  return c;
}

}  // namespace

bool TaskRecord::all_index_scans() const {
  return !scans.empty() &&
         std::all_of(scans.begin(), scans.end(), [](const BlockScan& s) { return s.mode == ScanMode::kIndexScan; });
}

double JobMetrics::avg_record_reader() const {
  if (record_reader_times.empty()) return 0;
  return std::accumulate(record_reader_times.begin(), record_reader_times.end(), 0.0) /
         static_cast<double>(record_reader_times.size());
}

MapFn IdentityMap(const BoundQuery& query) {
  std::vector<AttrType> types;
  for (int p : query.projection) types.push_back(query.schema.at(p).type);
  const char delimiter = query.schema.delimiter();
  return [types, delimiter](const Record* record, const std::string* bad, std::vector<std::string>& out) {
    if (bad != nullptr) {
      out.push_back(*bad);
      return;
    }
    std::string line;
    for (size_t i = 0; i < record->values.size(); ++i) {
      if (i > 0) line.push_back(delimiter);
      AppendValue(&line, types[i], record->values[i]);
    }
    out.push_back(std::move(line));
  };
}

JobResult RunJob(Cluster& cluster, const std::string& file, const QueryAnnotation& annotation,
                 const JobOptions& options) {
  const auto start = Clock::now();
  Namenode& nn = cluster.namenode();
  std::optional<FileEntry> entry = nn.File(file);
  if (!entry) Throw(ErrorCode::kInvalidArgument, "no file named " + file);
  const BoundQuery query = Bind(annotation, entry->schema);
  const std::vector<BlockId> blocks = nn.BlocksOf(file);
  const int slots = cluster.config().map_slots;

  JobResult result;
  JobMetrics& m = result.metrics;
  const std::vector<int> alive_at_start = nn.AliveNodes();
  if (alive_at_start.empty()) Throw(ErrorCode::kNoAliveNodes, "no live datanodes");
  m.parallel_map_slots = static_cast<int>(alive_at_start.size()) * slots;
  m.index_attribute = ChooseIndexAttribute(nn, blocks, query);
  const std::vector<InputSplit> splits = options.splitting == SplittingPolicy::kHail
                                             ? HailSplitting(nn, blocks, m.index_attribute, slots)
                                             : DefaultSplitting(nn, blocks, m.index_attribute);
  m.map_task_count = static_cast<int>(splits.size());
  const MapFn map = options.map ? options.map : IdentityMap(query);

  std::deque<Pending> pending;
  for (size_t i = 0; i < splits.size(); ++i) pending.push_back({i, 0, start, false});
  std::vector<int> free_slots(cluster.config().datanodes + 1, slots);
  std::map<int, int> running_on;  // node -> running attempts
  Channel<Completion> done;
  std::vector<std::thread> threads;
  std::mt19937_64 rng(options.seed);
  size_t completed = 0;
  size_t running = 0;
  bool killed = false;
  std::optional<HailError> fatal;

  auto launch = [&](const Pending& p, int node) {
    TaskRecord rec;
    rec.split = static_cast<int>(p.split);
    rec.attempt = p.attempt;
    rec.node = node;
    rec.planned = splits[p.split].mode;
    rec.rescheduled = p.rescheduled;
    free_slots[node]--;
    running_on[node]++;
    running++;
    threads.emplace_back([&, rec, split = &splits[p.split]] {
      done.Push(RunTask(cluster, query, *split, m.index_attribute, options, map, rec));
    });
  };

  while (completed < splits.size() && !fatal) {
    const auto now = Clock::now();
    if (options.kill_at_fraction && !killed &&
        static_cast<double>(completed) >= *options.kill_at_fraction * static_cast<double>(splits.size())) {
      std::vector<int> busy;
      for (const auto& [node, n] : running_on) {
        if (n > 0 && cluster.IsUp(node)) busy.push_back(node);
      }
      if (busy.empty()) {
        for (int d = 1; d <= cluster.config().datanodes; ++d) {
          if (cluster.IsUp(d)) busy.push_back(d);
        }
      }
      if (!busy.empty()) {
        m.killed_node = busy[std::uniform_int_distribution<size_t>(0, busy.size() - 1)(rng)];
        cluster.KillNode(m.killed_node);
      }
      killed = true;
    }

    const std::vector<int> alive = nn.AliveNodes();
    // Local placement first: a task goes to its split's target when that
    // node has a free slot.
    for (auto it = pending.begin(); it != pending.end();) {
      const int target = splits[it->split].blocks.empty() ? 0 : splits[it->split].blocks.front().target;
      if (it->not_before <= now && target != 0 && free_slots[target] > 0 &&
          std::find(alive.begin(), alive.end(), target) != alive.end()) {
        launch(*it, target);
        it = pending.erase(it);
      } else {
        ++it;
      }
    }
    // Remaining ready tasks run remotely on the lowest-numbered free node.
    for (auto it = pending.begin(); it != pending.end();) {
      if (it->not_before > now) {
        ++it;
        continue;
      }
      auto node = std::find_if(alive.begin(), alive.end(), [&](int d) { return free_slots[d] > 0; });
      if (node == alive.end()) break;
      launch(*it, *node);
      it = pending.erase(it);
    }
    if (running == 0 && !pending.empty() && alive.empty()) {
      fatal = HailError(ErrorCode::kNoAliveNodes, "no live datanodes left to run map tasks");
      break;
    }

    auto wait = std::chrono::milliseconds(200);
    for (const Pending& p : pending) {
      if (p.not_before > now) {
        wait = std::min(wait, std::chrono::duration_cast<std::chrono::milliseconds>(p.not_before - now) +
                                  std::chrono::milliseconds(1));
      } else {
        wait = std::min(wait, std::chrono::milliseconds(5));
      }
    }
    std::optional<Completion> c = done.PopFor(wait);
    if (!c) continue;
    running--;
    const int node = c->record.node;
    free_slots[node]++;
    running_on[node]--;
    const auto killed_at = cluster.KilledAt(node);
    const bool host_lost = killed_at != Clock::time_point::max();
    if (host_lost) c->record.failed = true;
    result.tasks.push_back(c->record);
    if (c->record.failed) {
      m.failed_attempts++;
      if (c->record.attempt + 1 >= options.max_attempts) {
        fatal = HailError(ErrorCode::kJobFailed, "split " + std::to_string(c->record.split) + " failed " +
                                                     std::to_string(options.max_attempts) + " times: " + c->error);
        break;
      }
      // The scheduler only learns of a lost node after the expiry interval.
      const auto retry_at = host_lost ? std::max(Clock::now(), nn.DeadAt(node)) : Clock::now();
      pending.push_back({static_cast<size_t>(c->record.split), c->record.attempt + 1, retry_at, true});
      continue;
    }
    completed++;
    m.record_reader_times.push_back(c->record.record_reader_seconds);
    for (const BlockScan& s : c->record.scans) m.bytes_read += s.bytes_read;
    if (c->record.rescheduled) {
      m.rescheduled_tasks++;
      if (c->record.all_index_scans()) m.rescheduled_index_scans++;
    }
    result.records += c->records;
    result.bad_records += c->bad_records;
    std::move(c->output.begin(), c->output.end(), std::back_inserter(result.output));
  }
  for (std::thread& t : threads) t.join();
  if (fatal) throw *fatal;

  if (options.reduce) result.output = options.reduce(std::move(result.output));
  m.t_end_to_end = Seconds(Clock::now() - start);
  m.t_ideal = m.parallel_map_slots == 0
                  ? 0
                  : static_cast<double>(m.map_task_count) / m.parallel_map_slots * m.avg_record_reader();
  m.t_overhead = m.t_end_to_end - m.t_ideal;
  return result;
}

double Slowdown(double t_baseline, double t_failure) {
  if (t_baseline <= 0) Throw(ErrorCode::kInvalidArgument, "baseline runtime must be positive");
  return (t_failure - t_baseline) / t_baseline * 100.0;
}

std::string MultisetDigest(std::vector<std::string> lines) {
  std::sort(lines.begin(), lines.end());
  Bytes all;
  for (const std::string& l : lines) {
    all.insert(all.end(), l.begin(), l.end());
    all.push_back('\n');
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%08x", Crc32c(all));
  return std::to_string(lines.size()) + ":" + buf;
}

void WriteMetrics(const std::filesystem::path& path, const JobMetrics& m) {
  std::ofstream out(path, std::ios::trunc);
  out << "t_end_to_end=" << m.t_end_to_end << "\n"
      << "t_ideal=" << m.t_ideal << "\n"
      << "t_overhead=" << m.t_overhead << "\n"
      << "avg_record_reader=" << m.avg_record_reader() << "\n"
      << "map_task_count=" << m.map_task_count << "\n"
      << "parallel_map_slots=" << m.parallel_map_slots << "\n"
      << "failed_attempts=" << m.failed_attempts << "\n"
      << "rescheduled_tasks=" << m.rescheduled_tasks << "\n"
      << "rescheduled_index_scans=" << m.rescheduled_index_scans << "\n"
      << "killed_node=" << m.killed_node << "\n"
      << "index_attribute=" << m.index_attribute << "\n"
      << "bytes_read=" << m.bytes_read << "\n";
  if (!out) Throw(ErrorCode::kIoError, "cannot write " + path.string());
}

void WriteOutput(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  for (const std::string& l : lines) out << l << '\n';
  if (!out) Throw(ErrorCode::kIoError, "cannot write " + path.string());
}

}  // namespace hail
