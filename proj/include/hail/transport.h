#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hail/bytes.h"
#include "hail/checksum.h"

namespace hail {

inline constexpr uint32_t kChunksPerPacket = 126;
inline constexpr size_t kMaxFrameBytes = 64 * 1024;
inline constexpr size_t kMaxFileIdLength = 128;

// Blocks are named by the client: logical file name plus block index.
struct BlockId {
  std::string file;
  uint64_t index = 0;

  std::string ToString() const { return file + "_" + std::to_string(index); }
  auto operator<=>(const BlockId&) const = default;
};

// Carried by packet 0 so every datanode learns the pipeline and its sort key.
struct PipelineSetup {
  std::vector<int> pipeline;   // datanode IDs, upstream first
  std::vector<int> sort_keys;  // parallel to pipeline; 0 = unsorted
  uint64_t partition_size = 0;
  int client = 0;

  bool operator==(const PipelineSetup&) const = default;
};

struct Packet {
  BlockId block;
  uint64_t seq = 0;
  bool last = false;
  std::optional<PipelineSetup> setup;
  std::vector<uint32_t> checksums;  // one per chunk, grouped ahead of the data
  Bytes data;

  uint32_t chunk_count() const { return static_cast<uint32_t>(checksums.size()); }
  bool operator==(const Packet&) const = default;
};

std::vector<Packet> Packetize(const BlockId& block, ByteSpan bytes, const PipelineSetup& setup);
Bytes Depacketize(const std::vector<Packet>& packets);

// First chunk whose data does not match its checksum.
std::optional<uint32_t> VerifyPacket(const Packet& packet);

enum class AckKind : uint8_t {
  kPacketValidated = 1,
  kBlockFlushed = 2,
  kCorrupt = 3,
  kFailed = 4,
};

std::string_view AckKindName(AckKind kind);

struct Ack {
  BlockId block;
  uint64_t seq = 0;
  AckKind kind = AckKind::kPacketValidated;
  uint32_t chunk = 0;               // failing chunk for kCorrupt
  std::vector<int> datanodes;       // appended on the way back upstream

  bool operator==(const Ack&) const = default;
};

enum class FrameType : uint8_t {
  kPacket = 1,
  kAck = 2,
};

// Frames are `u32 body length | u8 type | body`.
Bytes EncodePacket(const Packet& packet);
Packet DecodePacket(ByteSpan frame);
Bytes EncodeAck(const Ack& ack);
Ack DecodeAck(ByteSpan frame);
FrameType PeekFrameType(ByteSpan frame);

struct FrameRegion {
  size_t offset = 0;
  size_t length = 0;
};

// Checksums followed by chunk data inside an encoded packet frame.
FrameRegion PacketPayloadRegion(ByteSpan frame);

}  // namespace hail
