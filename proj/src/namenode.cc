#include "hail/namenode.h"

#include <mutex>

#include "hail/error.h"

namespace hail {

ReplicaInfo DescribeReplica(int datanode, const BlockHeader& header,
                            const std::optional<IndexSection>& index) {
  ReplicaInfo info;
  info.datanode = datanode;
  info.block_size = header.file_size();
  info.row_count = header.row_count;
  info.index_offset = header.index_section.offset;
  info.index_length = header.index_section.length;
  if (index) {
    info.sort_key = index->index.key_position;
    info.indexed_attribute = index->index.key_position;
    info.index_type = kIndexTypeSparseClustered;
    info.partition_size = index->index.partition_size;
  }
  return info;
}

Namenode::Namenode(int datanode_count, std::chrono::milliseconds expiry)
    : datanode_count_(datanode_count), expiry_(expiry) {
  if (datanode_count < 1) Throw(ErrorCode::kInvalidArgument, "a cluster needs at least one datanode");
}

void Namenode::CheckNode(int datanode) const {
  if (datanode < 1 || datanode > datanode_count_) {
    Throw(ErrorCode::kInvalidArgument, "no datanode " + std::to_string(datanode));
  }
}

bool Namenode::IsAliveLocked(int datanode) const {
  auto it = killed_at_.find(datanode);
  return it == killed_at_.end() || Clock::now() < it->second + expiry_;
}

std::vector<int> Namenode::AllocatePipeline(const BlockId& block, int replication) {
  std::unique_lock lock(mu_);
  if (replication < 1) Throw(ErrorCode::kInvalidArgument, "replication must be >= 1");
  std::vector<int> alive;
  for (int d = 1; d <= datanode_count_; ++d) {
    if (IsAliveLocked(d)) alive.push_back(d);
  }
  if (static_cast<int>(alive.size()) < replication) {
    Throw(ErrorCode::kInsufficientDatanodes, std::to_string(alive.size()) + " live datanodes for replication " +
                                                 std::to_string(replication));
  }
  const size_t start = allocations_++ % alive.size();
  std::vector<int> pipeline;
  for (int i = 0; i < replication; ++i) pipeline.push_back(alive[(start + i) % alive.size()]);
  expected_[block] = replication;
  return pipeline;
}

void Namenode::ExpectReplicas(const BlockId& block, int replication) {
  std::unique_lock lock(mu_);
  expected_[block] = replication;
}

void Namenode::RegisterReplica(const BlockId& block, const ReplicaInfo& info) {
  CheckNode(info.datanode);
  std::unique_lock lock(mu_);
  dir_block_[block].insert(info.datanode);
  dir_rep_[{block, info.datanode}] = info;
}

void Namenode::DropFile(const std::string& file) {
  std::unique_lock lock(mu_);
  for (auto it = dir_block_.begin(); it != dir_block_.end();) {
    it = it->first.file == file ? dir_block_.erase(it) : std::next(it);
  }
  for (auto it = dir_rep_.begin(); it != dir_rep_.end();) {
    it = it->first.first.file == file ? dir_rep_.erase(it) : std::next(it);
  }
  for (auto it = expected_.begin(); it != expected_.end();) {
    it = it->first.file == file ? expected_.erase(it) : std::next(it);
  }
  files_.erase(file);
}

const std::set<int>& Namenode::HostsLocked(const BlockId& block) const {
  auto it = dir_block_.find(block);
  auto exp = expected_.find(block);
  if (it == dir_block_.end() || exp == expected_.end() ||
      static_cast<int>(it->second.size()) < exp->second) {
    Throw(ErrorCode::kUnknownBlock, "block " + block.ToString() + " is not registered");
  }
  return it->second;
}

bool Namenode::IsVisible(const BlockId& block) const {
  std::shared_lock lock(mu_);
  auto it = dir_block_.find(block);
  auto exp = expected_.find(block);
  return it != dir_block_.end() && exp != expected_.end() &&
         static_cast<int>(it->second.size()) >= exp->second;
}

std::vector<int> Namenode::GetHosts(const BlockId& block) const {
  std::shared_lock lock(mu_);
  std::vector<int> out;
  for (int d : HostsLocked(block)) {
    if (IsAliveLocked(d)) out.push_back(d);
  }
  return out;
}

std::vector<int> Namenode::GetHostsWithIndex(const BlockId& block, int attribute) const {
  std::shared_lock lock(mu_);
  std::vector<int> matching;
  std::vector<int> rest;
  for (int d : HostsLocked(block)) {
    if (!IsAliveLocked(d)) continue;
    const ReplicaInfo& info = dir_rep_.at({block, d});
    (info.indexed_attribute == attribute && attribute != 0 ? matching : rest).push_back(d);
  }
  matching.insert(matching.end(), rest.begin(), rest.end());
  return matching;
}

std::optional<ReplicaInfo> Namenode::Replica(const BlockId& block, int datanode) const {
  std::shared_lock lock(mu_);
  auto it = dir_rep_.find({block, datanode});
  if (it == dir_rep_.end()) return std::nullopt;
  return it->second;
}

std::vector<ReplicaInfo> Namenode::Replicas(const BlockId& block) const {
  std::shared_lock lock(mu_);
  std::vector<ReplicaInfo> out;
  auto it = dir_block_.find(block);
  if (it == dir_block_.end()) return out;
  for (int d : it->second) out.push_back(dir_rep_.at({block, d}));
  return out;
}

void Namenode::ReportKilled(int datanode, Clock::time_point at) {
  CheckNode(datanode);
  std::unique_lock lock(mu_);
  killed_at_[datanode] = at;
}

void Namenode::ReportRevived(int datanode) {
  CheckNode(datanode);
  std::unique_lock lock(mu_);
  killed_at_.erase(datanode);
}

bool Namenode::IsAlive(int datanode) const {
  CheckNode(datanode);
  std::shared_lock lock(mu_);
  return IsAliveLocked(datanode);
}

std::vector<int> Namenode::AliveNodes() const {
  std::shared_lock lock(mu_);
  std::vector<int> out;
  for (int d = 1; d <= datanode_count_; ++d) {
    if (IsAliveLocked(d)) out.push_back(d);
  }
  return out;
}

Namenode::Clock::time_point Namenode::DeadAt(int datanode) const {
  std::shared_lock lock(mu_);
  auto it = killed_at_.find(datanode);
  if (it == killed_at_.end()) return Clock::time_point::max();
  return it->second + expiry_;
}

void Namenode::ReserveFile(const std::string& name) {
  std::unique_lock lock(mu_);
  if (files_.count(name) != 0 || reserved_.count(name) != 0) {
    Throw(ErrorCode::kAlreadyExists, "file " + name + " already exists");
  }
  reserved_.insert(name);
}

void Namenode::ReleaseFile(const std::string& name) {
  std::unique_lock lock(mu_);
  reserved_.erase(name);
}

void Namenode::CommitFile(const FileEntry& entry) {
  std::unique_lock lock(mu_);
  reserved_.erase(entry.name);
  if (files_.count(entry.name) != 0) Throw(ErrorCode::kAlreadyExists, "file " + entry.name + " already exists");
  files_[entry.name] = entry;
  for (uint64_t b = 0; b < entry.blocks; ++b) expected_[BlockId{entry.name, b}] = entry.replication;
}

std::optional<FileEntry> Namenode::File(const std::string& name) const {
  std::shared_lock lock(mu_);
  auto it = files_.find(name);
  if (it == files_.end()) return std::nullopt;
  return it->second;
}

std::vector<FileEntry> Namenode::Files() const {
  std::shared_lock lock(mu_);
  std::vector<FileEntry> out;
  for (const auto& [name, entry] : files_) out.push_back(entry);
  return out;
}

std::vector<BlockId> Namenode::BlocksOf(const std::string& name) const {
  std::optional<FileEntry> entry = File(name);
  if (!entry) Throw(ErrorCode::kInvalidArgument, "no file named " + name);
  std::vector<BlockId> out;
  for (uint64_t b = 0; b < entry->blocks; ++b) out.push_back(BlockId{name, b});
  return out;
}

}  // namespace hail
