#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>

#include "hail/checksum.h"
#include "hail/pax_block.h"

namespace hail {

// Disk traffic of block and checksum files, across all datanodes.
struct IoStats {
  std::atomic<uint64_t> block_writes{0};
  std::atomic<uint64_t> block_bytes_written{0};
  std::atomic<uint64_t> checksum_writes{0};
  std::atomic<uint64_t> block_reads{0};
  std::atomic<uint64_t> block_bytes_read{0};

  void Reset();
};

std::filesystem::path ChecksumPathFor(const std::filesystem::path& block_path);

// Stored replica opened for reading. Every read is widened to whole chunks
// and verified against the `.crc` sibling; any mismatch or a dead host is a
// READ_FAILED.
class ReplicaFile : public ColumnSource {
 public:
  using AliveFn = std::function<bool()>;

  explicit ReplicaFile(const std::filesystem::path& path, AliveFn alive = {}, IoStats* stats = nullptr);
  ~ReplicaFile() override;
  ReplicaFile(const ReplicaFile&) = delete;
  ReplicaFile& operator=(const ReplicaFile&) = delete;

  const BlockHeader& header() override { return header_; }
  const std::optional<IndexSection>& index() override;
  std::vector<std::string> ReadBadRows() override;

  uint64_t size() const { return size_; }
  Bytes ReadRange(uint64_t offset, uint64_t length);
  Bytes ReadAll() { return ReadRange(0, size_); }

 protected:
  Bytes DoRead(int position, uint64_t offset, uint64_t length) override;

 private:
  void CheckAlive() const;

  std::filesystem::path path_;
  AliveFn alive_;
  IoStats* stats_;
  int fd_ = -1;
  uint64_t size_ = 0;
  ChecksumFile crc_;
  BlockHeader header_;
  bool index_loaded_ = false;
  std::optional<IndexSection> index_;
};

}  // namespace hail
