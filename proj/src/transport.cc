#include "hail/transport.h"

#include "hail/error.h"

namespace hail {

namespace {

constexpr size_t kFramePrefix = 5;

void PutBlockId(ByteWriter& w, const BlockId& id) {
  if (id.file.size() > kMaxFileIdLength) Throw(ErrorCode::kInvalidArgument, "file ID too long");
  w.PutU16(static_cast<uint16_t>(id.file.size()));
  w.PutString(id.file);
  w.PutU64(id.index);
}

BlockId GetBlockId(ByteReader& r) {
  BlockId id;
  id.file = r.GetString(r.GetU16());
  id.index = r.GetU64();
  return id;
}

ByteReader OpenFrame(ByteSpan frame, FrameType expected) {
  ByteReader r(frame);
  const uint32_t len = r.GetU32();
  if (len + 4ull != frame.size()) Throw(ErrorCode::kFormatError, "frame length mismatch");
  if (r.GetU8() != static_cast<uint8_t>(expected)) Throw(ErrorCode::kFormatError, "unexpected frame type");
  return r;
}

Bytes CloseFrame(Bytes body_with_prefix) {
  const uint32_t len = static_cast<uint32_t>(body_with_prefix.size() - 4);
  StoreU32(body_with_prefix.data(), len);
  return body_with_prefix;
}

}  // namespace

std::vector<Packet> Packetize(const BlockId& block, ByteSpan bytes, const PipelineSetup& setup) {
  if (bytes.empty()) Throw(ErrorCode::kInvalidArgument, "cannot packetize an empty block");
  const size_t per_packet = static_cast<size_t>(kChunksPerPacket) * kChunkSize;
  std::vector<Packet> packets;
  for (size_t off = 0; off < bytes.size(); off += per_packet) {
    Packet p;
    p.block = block;
    p.seq = packets.size();
    if (p.seq == 0) p.setup = setup;
    ByteSpan part = bytes.subspan(off, std::min(per_packet, bytes.size() - off));
    p.data.assign(part.begin(), part.end());
    p.checksums = ChunkChecksums(part);
    packets.push_back(std::move(p));
  }
  packets.back().last = true;
  return packets;
}

Bytes Depacketize(const std::vector<Packet>& packets) {
  Bytes out;
  for (size_t i = 0; i < packets.size(); ++i) {
    if (packets[i].seq != i) Throw(ErrorCode::kFormatError, "packet sequence gap");
    out.insert(out.end(), packets[i].data.begin(), packets[i].data.end());
  }
  if (packets.empty() || !packets.back().last) Throw(ErrorCode::kFormatError, "missing last packet");
  return out;
}

std::optional<uint32_t> VerifyPacket(const Packet& packet) {
  const size_t chunks = (packet.data.size() + kChunkSize - 1) / kChunkSize;
  const ByteSpan data(packet.data);
  for (uint32_t c = 0; c < std::max(chunks, packet.checksums.size()); ++c) {
    if (c >= chunks || c >= packet.checksums.size()) return c;
    const size_t off = static_cast<size_t>(c) * kChunkSize;
    if (Crc32c(data.subspan(off, std::min<size_t>(kChunkSize, data.size() - off))) != packet.checksums[c]) {
      return c;
    }
  }
  return std::nullopt;
}

std::string_view AckKindName(AckKind kind) {
  switch (kind) {
    case AckKind::kPacketValidated: return "PACKET_VALIDATED";
    case AckKind::kBlockFlushed: return "BLOCK_FLUSHED";
    case AckKind::kCorrupt: return "CORRUPT";
    case AckKind::kFailed: return "FAILED";
  }
  return "UNKNOWN";
}

Bytes EncodePacket(const Packet& p) {
  Bytes out;
  out.reserve(kFramePrefix + 64 + p.checksums.size() * 4 + p.data.size());
  ByteWriter w(&out);
  w.PutU32(0);
  w.PutU8(static_cast<uint8_t>(FrameType::kPacket));
  PutBlockId(w, p.block);
  w.PutU64(p.seq);
  w.PutU8(p.last ? 1 : 0);
  w.PutU8(p.setup ? 1 : 0);
  if (p.setup) {
    const PipelineSetup& s = *p.setup;
    if (s.sort_keys.size() != s.pipeline.size()) {
      Throw(ErrorCode::kInvalidArgument, "one sort key per pipeline node is required");
    }
    w.PutU32(static_cast<uint32_t>(s.client));
    w.PutU64(s.partition_size);
    w.PutU32(static_cast<uint32_t>(s.pipeline.size()));
    for (size_t i = 0; i < s.pipeline.size(); ++i) {
      w.PutU32(static_cast<uint32_t>(s.pipeline[i]));
      w.PutU32(static_cast<uint32_t>(s.sort_keys[i]));
    }
  }
  w.PutU32(p.chunk_count());
  w.PutU32(static_cast<uint32_t>(p.data.size()));
  for (uint32_t c : p.checksums) w.PutU32(c);
  w.PutBytes(p.data);
  if (out.size() > kMaxFrameBytes) {
    Throw(ErrorCode::kInvalidArgument, "packet frame of " + std::to_string(out.size()) + " bytes exceeds 64 KB");
  }
  return CloseFrame(std::move(out));
}

namespace {

// Reads everything up to the checksum array; leaves `r` positioned on it.
Packet DecodePacketHead(ByteReader& r, uint32_t* chunk_count, uint32_t* data_len) {
  Packet p;
  p.block = GetBlockId(r);
  p.seq = r.GetU64();
  p.last = r.GetU8() != 0;
  if (r.GetU8() != 0) {
    PipelineSetup s;
    s.client = static_cast<int>(r.GetU32());
    s.partition_size = r.GetU64();
    const uint32_t n = r.GetU32();
    if (n > 64) Throw(ErrorCode::kFormatError, "implausible pipeline length");
    for (uint32_t i = 0; i < n; ++i) {
      s.pipeline.push_back(static_cast<int>(r.GetU32()));
      s.sort_keys.push_back(static_cast<int>(r.GetU32()));
    }
    p.setup = std::move(s);
  }
  *chunk_count = r.GetU32();
  *data_len = r.GetU32();
  return p;
}

}  // namespace

Packet DecodePacket(ByteSpan frame) {
  ByteReader r = OpenFrame(frame, FrameType::kPacket);
  uint32_t chunks = 0;
  uint32_t len = 0;
  Packet p = DecodePacketHead(r, &chunks, &len);
  if (chunks > kChunksPerPacket) Throw(ErrorCode::kFormatError, "too many chunks in packet");
  p.checksums.reserve(chunks);
  for (uint32_t i = 0; i < chunks; ++i) p.checksums.push_back(r.GetU32());
  ByteSpan data = r.GetBytes(len);
  p.data.assign(data.begin(), data.end());
  if (r.remaining() != 0) Throw(ErrorCode::kFormatError, "trailing bytes in packet frame");
  return p;
}

FrameRegion PacketPayloadRegion(ByteSpan frame) {
  ByteReader r = OpenFrame(frame, FrameType::kPacket);
  uint32_t chunks = 0;
  uint32_t len = 0;
  DecodePacketHead(r, &chunks, &len);
  return {r.position(), chunks * 4ull + len};
}

Bytes EncodeAck(const Ack& a) {
  Bytes out;
  ByteWriter w(&out);
  w.PutU32(0);
  w.PutU8(static_cast<uint8_t>(FrameType::kAck));
  PutBlockId(w, a.block);
  w.PutU64(a.seq);
  w.PutU8(static_cast<uint8_t>(a.kind));
  w.PutU32(a.chunk);
  w.PutU32(static_cast<uint32_t>(a.datanodes.size()));
  for (int d : a.datanodes) w.PutU32(static_cast<uint32_t>(d));
  return CloseFrame(std::move(out));
}

Ack DecodeAck(ByteSpan frame) {
  ByteReader r = OpenFrame(frame, FrameType::kAck);
  Ack a;
  a.block = GetBlockId(r);
  a.seq = r.GetU64();
  const uint8_t kind = r.GetU8();
  if (kind < 1 || kind > 4) Throw(ErrorCode::kFormatError, "unknown ack kind");
  a.kind = static_cast<AckKind>(kind);
  a.chunk = r.GetU32();
  const uint32_t n = r.GetU32();
  if (n > 64) Throw(ErrorCode::kFormatError, "implausible ack chain length");
  for (uint32_t i = 0; i < n; ++i) a.datanodes.push_back(static_cast<int>(r.GetU32()));
  if (r.remaining() != 0) Throw(ErrorCode::kFormatError, "trailing bytes in ack frame");
  return a;
}

FrameType PeekFrameType(ByteSpan frame) {
  if (frame.size() < kFramePrefix) Throw(ErrorCode::kFormatError, "short frame");
  const uint8_t t = frame[4];
  if (t != 1 && t != 2) Throw(ErrorCode::kFormatError, "unknown frame type");
  return static_cast<FrameType>(t);
}

}  // namespace hail
