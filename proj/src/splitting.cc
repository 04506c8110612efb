#include "hail/splitting.h"

#include <map>

#include "hail/error.h"

namespace hail {

namespace {

std::vector<int> LiveHosts(const Namenode& namenode, const BlockId& block, int index_attribute) {
  std::vector<int> hosts = namenode.GetHostsWithIndex(block, index_attribute);
  if (hosts.empty()) Throw(ErrorCode::kJobFailed, "block " + block.ToString() + " has no live replica");
  return hosts;
}

bool IndexedOn(const Namenode& namenode, const BlockId& block, int datanode, int attribute) {
  std::optional<ReplicaInfo> info = namenode.Replica(block, datanode);
  return attribute != 0 && info && info->indexed_attribute == attribute;
}

std::vector<InputSplit> OneSplitPerBlock(const Namenode& namenode, const std::vector<BlockId>& blocks,
                                         int index_attribute) {
  std::vector<InputSplit> splits;
  for (size_t i = 0; i < blocks.size(); ++i) {
    const std::vector<int> hosts = LiveHosts(namenode, blocks[i], index_attribute);
    InputSplit s;
    s.id = static_cast<int>(i);
    const bool indexed = IndexedOn(namenode, blocks[i], hosts.front(), index_attribute);
    // Without an index to chase, spread full scans over the replicas.
    const int target = indexed ? hosts.front() : hosts[blocks[i].index % hosts.size()];
    s.blocks.push_back({blocks[i], target});
    s.mode = indexed ? ScanMode::kIndexScan : ScanMode::kFullScan;
    splits.push_back(std::move(s));
  }
  return splits;
}

}  // namespace

std::string_view SplittingPolicyName(SplittingPolicy policy) {
  return policy == SplittingPolicy::kHail ? "hail" : "default";
}

int ChooseIndexAttribute(const Namenode& namenode, const std::vector<BlockId>& blocks, const BoundQuery& query) {
  for (const Conjunct& c : query.conjuncts) {
    if (!IsFixedSize(c.type)) continue;
    for (const BlockId& b : blocks) {
      for (const ReplicaInfo& r : namenode.Replicas(b)) {
        if (r.indexed_attribute == c.position && namenode.IsAlive(r.datanode)) return c.position;
      }
    }
  }
  return 0;
}

std::vector<InputSplit> HailSplitting(const Namenode& namenode, const std::vector<BlockId>& blocks,
                                      int index_attribute, int map_slots) {
  if (index_attribute == 0) return OneSplitPerBlock(namenode, blocks, 0);
  if (map_slots < 1) Throw(ErrorCode::kInvalidArgument, "map_slots must be >= 1");
  std::map<int, std::vector<BlockId>> groups;
  for (const BlockId& b : blocks) groups[LiveHosts(namenode, b, index_attribute).front()].push_back(b);
  std::vector<InputSplit> splits;
  for (const auto& [host, group] : groups) {
    const size_t k = std::min<size_t>(map_slots, group.size());
    const size_t base = splits.size();
    for (size_t i = 0; i < k; ++i) {
      InputSplit s;
      s.id = static_cast<int>(base + i);
      s.mode = ScanMode::kIndexScan;
      splits.push_back(std::move(s));
    }
    for (size_t i = 0; i < group.size(); ++i) splits[base + i % k].blocks.push_back({group[i], host});
  }
  return splits;
}

std::vector<InputSplit> DefaultSplitting(const Namenode& namenode, const std::vector<BlockId>& blocks,
                                         int index_attribute) {
  return OneSplitPerBlock(namenode, blocks, index_attribute);
}

}  // namespace hail
