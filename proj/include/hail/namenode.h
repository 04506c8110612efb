#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "hail/pax_block.h"
#include "hail/transport.h"

namespace hail {

// What the namenode knows about one replica of one block.
struct ReplicaInfo {
  int datanode = 0;
  int sort_key = 0;           // 0 = unsorted
  int indexed_attribute = 0;  // 0 = no index
  uint8_t index_type = 0;
  uint64_t block_size = 0;
  uint64_t row_count = 0;
  uint64_t index_offset = 0;
  uint64_t index_length = 0;
  uint64_t partition_size = 0;

  bool operator==(const ReplicaInfo&) const = default;
};

ReplicaInfo DescribeReplica(int datanode, const BlockHeader& header,
                            const std::optional<IndexSection>& index);

struct FileEntry {
  std::string name;
  uint64_t blocks = 0;
  int replication = 0;
  Schema schema;

  bool operator==(const FileEntry&) const = default;
};

class Namenode {
 public:
  using Clock = std::chrono::steady_clock;

  Namenode(int datanode_count, std::chrono::milliseconds expiry);

  int datanode_count() const { return datanode_count_; }

  // r distinct live datanodes, round-robin with a rotation per block.
  std::vector<int> AllocatePipeline(const BlockId& block, int replication);

  void RegisterReplica(const BlockId& block, const ReplicaInfo& info);
  void ExpectReplicas(const BlockId& block, int replication);
  void DropFile(const std::string& file);

  // A block becomes visible once every expected replica has registered.
  bool IsVisible(const BlockId& block) const;
  std::vector<int> GetHosts(const BlockId& block) const;
  std::vector<int> GetHostsWithIndex(const BlockId& block, int attribute) const;
  std::optional<ReplicaInfo> Replica(const BlockId& block, int datanode) const;
  std::vector<ReplicaInfo> Replicas(const BlockId& block) const;

  // Failure detection lags the kill by the expiry interval.
  void ReportKilled(int datanode, Clock::time_point at);
  void ReportRevived(int datanode);
  bool IsAlive(int datanode) const;
  std::vector<int> AliveNodes() const;
  Clock::time_point DeadAt(int datanode) const;
  std::chrono::milliseconds expiry() const { return expiry_; }

  // File catalog. Reserve guards against concurrent uploads of one name.
  void ReserveFile(const std::string& name);
  void ReleaseFile(const std::string& name);
  void CommitFile(const FileEntry& entry);
  std::optional<FileEntry> File(const std::string& name) const;
  std::vector<FileEntry> Files() const;
  std::vector<BlockId> BlocksOf(const std::string& name) const;

 private:
  void CheckNode(int datanode) const;
  bool IsAliveLocked(int datanode) const;
  const std::set<int>& HostsLocked(const BlockId& block) const;

  const int datanode_count_;
  const std::chrono::milliseconds expiry_;

  mutable std::shared_mutex mu_;
  uint64_t allocations_ = 0;
  std::map<BlockId, std::set<int>> dir_block_;
  std::map<std::pair<BlockId, int>, ReplicaInfo> dir_rep_;
  std::map<BlockId, int> expected_;
  std::map<int, Clock::time_point> killed_at_;
  std::map<std::string, FileEntry> files_;
  std::set<std::string> reserved_;
};

}  // namespace hail
