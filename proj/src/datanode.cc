#include "hail/datanode.h"

#include <algorithm>
#include <fstream>
#include <future>

#include "hail/error.h"
#include "hail/index.h"

namespace hail {

namespace {

void WriteWhole(const std::filesystem::path& path, ByteSpan bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) Throw(ErrorCode::kIoError, "cannot write " + path.string());
}

std::optional<BlockId> ParseBlockFileName(const std::filesystem::path& path) {
  if (path.extension() != ".hail") return std::nullopt;
  const std::string stem = path.stem().string();
  const size_t cut = stem.rfind('_');
  if (cut == std::string::npos || cut == 0 || cut + 1 == stem.size()) return std::nullopt;
  BlockId id;
  id.file = stem.substr(0, cut);
  try {
    size_t used = 0;
    id.index = std::stoull(stem.substr(cut + 1), &used);
    if (used != stem.size() - cut - 1) return std::nullopt;
  } catch (const std::exception&) {
    return std::nullopt;
  }
  return id;
}

}  // namespace

Datanode::Datanode(int id, std::filesystem::path dir, Router* router, Namenode* namenode, IoStats* stats)
    : id_(id), dir_(std::move(dir)), router_(router), namenode_(namenode), stats_(stats) {
  std::filesystem::create_directories(dir_);
  thread_ = std::thread([this] { Run(); });
}

Datanode::~Datanode() {
  inbox_.Close();
  if (thread_.joinable()) thread_.join();
}

bool Datanode::Deliver(Bytes frame) {
  if (!alive_.load()) return false;
  return inbox_.Push({std::move(frame), {}});
}

void Datanode::RunInActor(std::function<void()> task) {
  std::promise<void> done;
  std::future<void> finished = done.get_future();
  if (!inbox_.Push({{}, [&] {
        if (task) task();
        done.set_value();
      }})) {
    return;
  }
  finished.wait();
}

void Datanode::ForgetFile(const std::string& file) {
  RunInActor([this, &file] {
    std::erase_if(blocks_, [&](const auto& kv) { return kv.first.file == file; });
    std::erase_if(aborted_, [&](const BlockId& id) { return id.file == file; });
  });
}

void Datanode::Kill() {
  alive_ = false;
  epoch_++;
}

void Datanode::Revive() { alive_ = true; }

std::filesystem::path Datanode::BlockPath(const BlockId& block) const {
  return dir_ / (block.ToString() + ".hail");
}

void Datanode::DeleteBlock(const BlockId& block) {
  std::lock_guard lock(file_mu_);
  std::error_code ec;
  const std::filesystem::path p = BlockPath(block);
  std::filesystem::remove(p, ec);
  std::filesystem::remove(ChecksumPathFor(p), ec);
}

void Datanode::DeleteFile(const std::string& file) {
  for (const auto& [id, path] : StoredBlocks()) {
    if (id.file == file) DeleteBlock(id);
  }
}

std::vector<std::pair<BlockId, std::filesystem::path>> Datanode::StoredBlocks() const {
  std::lock_guard lock(file_mu_);
  std::vector<std::pair<BlockId, std::filesystem::path>> out;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir_, ec)) {
    if (std::optional<BlockId> id = ParseBlockFileName(entry.path())) out.emplace_back(*id, entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void Datanode::Run() {
  while (std::optional<Item> item = inbox_.Pop()) {
    if (item->task) {
      item->task();
      continue;
    }
    Bytes* frame = &item->frame;
    const uint64_t epoch = epoch_.load();
    if (epoch != seen_epoch_) {
      // A kill loses everything held in memory.
      blocks_.clear();
      aborted_.clear();
      seen_epoch_ = epoch;
    }
    if (!alive_.load()) continue;
    try {
      if (PeekFrameType(*frame) == FrameType::kPacket) {
        HandlePacket(std::move(*frame));
      } else {
        HandleAck(DecodeAck(*frame));
      }
    } catch (const HailError&) {
      // Undecodable frames cannot be answered; the client times out.
    }
  }
}

void Datanode::SendUpstream(const BlockState& state, Ack ack) {
  if (!alive_.load()) return;
  ack.datanodes.push_back(id_);
  const int target = state.position == 0 ? state.setup.client : state.setup.pipeline[state.position - 1];
  router_->Deliver(target, EncodeAck(ack));
}

void Datanode::Abort(const BlockId& id, const BlockState& state, AckKind kind, uint64_t seq, uint32_t chunk) {
  DeleteBlock(id);
  aborted_.insert(id);
  SendUpstream(state, Ack{id, seq, kind, chunk, {}});
  blocks_.erase(id);
}

void Datanode::HandlePacket(Bytes frame) {
  Packet p = DecodePacket(frame);
  if (aborted_.count(p.block) != 0) return;
  if (p.seq == 0) {
    if (!p.setup) return;
    auto pos = std::find(p.setup->pipeline.begin(), p.setup->pipeline.end(), id_);
    if (pos == p.setup->pipeline.end()) return;
    BlockState state;
    state.setup = *p.setup;
    state.position = pos - p.setup->pipeline.begin();
    blocks_[p.block] = std::move(state);
  }
  auto it = blocks_.find(p.block);
  if (it == blocks_.end()) return;
  BlockState& state = it->second;
  const BlockId id = p.block;

  if (p.seq != state.next_seq) return Abort(id, state, AckKind::kFailed, p.seq, 0);
  state.next_seq++;

  if (!IsLast(state)) {
    if (!router_->Deliver(state.setup.pipeline[state.position + 1], std::move(frame))) {
      return Abort(id, state, AckKind::kFailed, p.seq, 0);
    }
  } else if (std::optional<uint32_t> bad = VerifyPacket(p)) {
    return Abort(id, state, AckKind::kCorrupt, p.seq, *bad);
  }
  state.assembled.insert(state.assembled.end(), p.data.begin(), p.data.end());

  if (p.last) {
    try {
      Finalize(id, state);
    } catch (const std::exception&) {
      // Upstream of the verifying node, wait for its verdict: a damaged
      // packet comes back as CORRUPT, anything else fails on BLOCK_FLUSHED.
      if (!IsLast(state)) return;
      return Abort(id, state, AckKind::kFailed, p.seq, 0);
    }
    if (IsLast(state)) {
      if (!alive_.load()) return;
      namenode_->RegisterReplica(id, state.info);
      SendUpstream(state, Ack{id, p.seq, AckKind::kBlockFlushed, 0, {}});
      blocks_.erase(id);
    }
  } else if (IsLast(state)) {
    SendUpstream(state, Ack{id, p.seq, AckKind::kPacketValidated, 0, {}});
  }
}

void Datanode::HandleAck(const Ack& ack) {
  auto it = blocks_.find(ack.block);
  if (it == blocks_.end()) return;
  BlockState& state = it->second;
  switch (ack.kind) {
    case AckKind::kPacketValidated:
      SendUpstream(state, ack);
      return;
    case AckKind::kBlockFlushed:
      if (!state.flushed) return Abort(ack.block, state, AckKind::kFailed, ack.seq, 0);
      if (!alive_.load()) return;
      namenode_->RegisterReplica(ack.block, state.info);
      SendUpstream(state, ack);
      blocks_.erase(it);
      return;
    case AckKind::kCorrupt:
    case AckKind::kFailed:
      DeleteBlock(ack.block);
      aborted_.insert(ack.block);
      SendUpstream(state, ack);
      blocks_.erase(it);
      return;
  }
}

void Datanode::Finalize(const BlockId& id, BlockState& state) {
  const int key = state.setup.sort_keys.at(state.position);
  Bytes out;
  if (key == 0) {
    out = std::move(state.assembled);
  } else {
    PaxBlock block = Deserialize(state.assembled);
    state.assembled = Bytes();
    out = Serialize(SortAndIndex(block, key, state.setup.partition_size));
  }
  const Bytes crc = BuildChecksumFile(out);
  const std::filesystem::path path = BlockPath(id);
  {
    std::lock_guard lock(file_mu_);
    WriteWhole(path, out);
    WriteWhole(ChecksumPathFor(path), crc);
  }
  stats_->block_writes++;
  stats_->block_bytes_written += out.size();
  stats_->checksum_writes++;

  const BlockHeader header = ParseHeader(out);
  std::optional<IndexSection> index;
  if (header.index_section.length > 0) {
    index = DecodeIndexSection(ByteSpan(out).subspan(header.index_section.offset, header.index_section.length),
                               header.schema);
  }
  state.info = DescribeReplica(id_, header, index);
  state.flushed = true;
}

}  // namespace hail
