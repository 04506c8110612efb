#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "hail/datanode.h"
#include "hail/namenode.h"
#include "hail/replica_file.h"
#include "hail/schema.h"

namespace hail {

struct ClusterConfig {
  int datanodes = 3;
  int map_slots = 2;
  int replication = 3;
  std::vector<int> sort_keys;  // empty or one per replica; 0 = NONE
  uint64_t block_size = kDefaultBlockBudget;
  uint64_t partition_size = kDefaultPartitionSize;
  std::chrono::milliseconds expiry{2000};
  std::filesystem::path storage_root;

  // Keys: datanodes, map_slots, replication, sort_keys, block_size,
  // partition_size, expiry_seconds, storage_root. `#` starts a comment.
  static ClusterConfig FromText(std::string_view text);
  static ClusterConfig Load(const std::filesystem::path& path);
  std::string ToText() const;
};

// Replication factor and the sort key of each pipeline position.
struct ReplicaConfig {
  int replication = 3;
  std::vector<int> sort_keys;  // empty means all NONE
  uint64_t partition_size = kDefaultPartitionSize;

  static ReplicaConfig FromCluster(const ClusterConfig& config);
  std::vector<int> KeysForPipeline() const;
  void Validate(const Schema& schema) const;
};

// Parses `3,1,NONE` style lists; attribute names resolve through `schema`.
std::vector<int> ParseSortKeys(std::string_view text, const Schema* schema = nullptr);

struct UploadOptions {
  size_t window = 4;  // blocks in flight
  std::optional<uint64_t> block_size;
  std::chrono::milliseconds ack_timeout{120000};
  // Fault injection: may rewrite an encoded packet frame before it is sent.
  std::function<void(const BlockId&, uint64_t seq, Bytes& frame)> mutate_frame;
  // Called after every packet of a block has been handed to the pipeline.
  std::function<void(const BlockId&)> on_block_sent;
};

struct UploadReport {
  std::string file;
  uint64_t blocks = 0;
  uint64_t rows = 0;
  uint64_t bad_records = 0;
  uint64_t input_bytes = 0;
  uint64_t bytes_sent = 0;
  double wall_seconds = 0;
  double parse_seconds = 0;
  double convert_seconds = 0;
  double pipeline_seconds = 0;
};

// Namenode, datanodes and the client upload path in one process. All state
// lives under `storage_root`; constructing a cluster over an existing root
// rebuilds the directories from the stored replicas.
class Cluster : public Router {
 public:
  explicit Cluster(ClusterConfig config);
  ~Cluster() override;
  Cluster(const Cluster&) = delete;
  Cluster& operator=(const Cluster&) = delete;

  const ClusterConfig& config() const { return config_; }
  Namenode& namenode() { return namenode_; }
  const Namenode& namenode() const { return namenode_; }
  IoStats& io_stats() { return io_; }

  UploadReport UploadFile(const std::string& name, const std::filesystem::path& input, const Schema& schema,
                          const ReplicaConfig& replicas, const UploadOptions& options = {});
  UploadReport Upload(const std::string& name, std::istream& input, const Schema& schema,
                      const ReplicaConfig& replicas, const UploadOptions& options = {});

  // Takes effect immediately for frames and reads; the namenode notices
  // after the expiry interval. `persist` survives a restart.
  void KillNode(int datanode, bool persist = false);
  void ReviveNode(int datanode, bool persist = false);
  bool IsUp(int datanode) const;
  Namenode::Clock::time_point KilledAt(int datanode) const;

  Datanode& datanode(int id);
  std::filesystem::path ReplicaPath(const BlockId& block, int datanode) const;
  std::unique_ptr<ReplicaFile> OpenReplica(const BlockId& block, int datanode);

  bool Deliver(int endpoint, Bytes frame) override;

 private:
  struct Session;

  std::shared_ptr<Session> OpenSession();
  void CloseSession(int endpoint);
  void AbortFile(const std::string& name);
  void Restart();
  std::filesystem::path CatalogPath(const std::string& name) const;

  ClusterConfig config_;
  IoStats io_;
  Namenode namenode_;
  std::vector<std::unique_ptr<Datanode>> datanodes_;
  std::vector<Namenode::Clock::time_point> killed_at_;

  mutable std::mutex sessions_mu_;
  std::map<int, std::shared_ptr<Session>> sessions_;
  int next_session_ = 0;
};

}  // namespace hail
