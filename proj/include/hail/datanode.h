#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

#include "hail/bytes.h"
#include "hail/channel.h"
#include "hail/namenode.h"
#include "hail/replica_file.h"
#include "hail/transport.h"

namespace hail {

// Delivers an encoded frame to a datanode or client endpoint. Returns false
// when the endpoint is down or unknown.
class Router {
 public:
  virtual ~Router() = default;
  virtual bool Deliver(int endpoint, Bytes frame) = 0;
};

// One simulated datanode: an actor thread draining an inbox of frames.
// Packets are forwarded downstream as soon as they arrive; the block is
// assembled in memory, sorted and indexed by this node's key, and written
// once as `<file>_<index>.hail` plus `.crc`.
class Datanode {
 public:
  Datanode(int id, std::filesystem::path dir, Router* router, Namenode* namenode, IoStats* stats);
  ~Datanode();
  Datanode(const Datanode&) = delete;
  Datanode& operator=(const Datanode&) = delete;

  int id() const { return id_; }
  const std::filesystem::path& dir() const { return dir_; }

  bool Deliver(Bytes frame);

  // Runs `task` on the actor thread after every frame queued before it, and
  // waits for it. Works on dead nodes too.
  void RunInActor(std::function<void()> task);

  // Drops in-memory assembly state for every block of `file`.
  void ForgetFile(const std::string& file);

  // A dead node drops every frame and serves no reads. Its files stay on
  // disk and are served again after Revive.
  void Kill();
  void Revive();
  bool alive() const { return alive_.load(); }

  std::filesystem::path BlockPath(const BlockId& block) const;
  void DeleteBlock(const BlockId& block);
  void DeleteFile(const std::string& file);
  std::vector<std::pair<BlockId, std::filesystem::path>> StoredBlocks() const;

 private:
  struct BlockState {
    PipelineSetup setup;
    size_t position = 0;
    uint64_t next_seq = 0;
    Bytes assembled;
    bool flushed = false;
    ReplicaInfo info;
  };

  void Run();
  void HandlePacket(Bytes frame);
  void HandleAck(const Ack& ack);
  void Finalize(const BlockId& id, BlockState& state);
  void SendUpstream(const BlockState& state, Ack ack);
  void Abort(const BlockId& id, const BlockState& state, AckKind kind, uint64_t seq, uint32_t chunk);
  bool IsLast(const BlockState& state) const { return state.position + 1 == state.setup.pipeline.size(); }

  const int id_;
  const std::filesystem::path dir_;
  Router* router_;
  Namenode* namenode_;
  IoStats* stats_;

  std::atomic<bool> alive_{true};
  std::atomic<uint64_t> epoch_{0};
  uint64_t seen_epoch_ = 0;
  mutable std::mutex file_mu_;
  struct Item {
    Bytes frame;
    std::function<void()> task;
  };
  Channel<Item> inbox_;
  std::map<BlockId, BlockState> blocks_;
  std::set<BlockId> aborted_;
  std::thread thread_;
};

}  // namespace hail
