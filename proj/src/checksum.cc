#include "hail/checksum.h"

#include <boost/crc.hpp>
#include <cstring>

#include "hail/error.h"

namespace hail {

namespace {
using Crc32cEngine = boost::crc_optimal<32, 0x1EDC6F41, 0xFFFFFFFF, 0xFFFFFFFF, true, true>;
}  // namespace

uint32_t Crc32c(ByteSpan data) {
  Crc32cEngine crc;
  crc.process_bytes(data.data(), data.size());
  return crc.checksum();
}

std::vector<uint32_t> ChunkChecksums(ByteSpan data, uint32_t chunk_size) {
  std::vector<uint32_t> sums;
  sums.reserve((data.size() + chunk_size - 1) / chunk_size);
  for (size_t off = 0; off < data.size(); off += chunk_size) {
    sums.push_back(Crc32c(data.subspan(off, std::min<size_t>(chunk_size, data.size() - off))));
  }
  return sums;
}

ChecksumFile MakeChecksumFile(ByteSpan data) {
  ChecksumFile f;
  f.data_length = data.size();
  f.sums = ChunkChecksums(data, f.chunk_size);
  return f;
}

Bytes EncodeChecksumFile(const ChecksumFile& file) {
  Bytes out;
  out.reserve(kChecksumHeaderLength + file.sums.size() * 4);
  ByteWriter w(&out);
  w.PutBytes(ByteSpan(reinterpret_cast<const uint8_t*>(kChecksumMagic), 4));
  w.PutU32(file.chunk_size);
  w.PutU8(file.algorithm);
  w.PutZeros(3);
  w.PutU64(file.data_length);
  w.PutU32(static_cast<uint32_t>(file.sums.size()));
  for (uint32_t s : file.sums) w.PutU32(s);
  return out;
}

ChecksumFile DecodeChecksumFile(ByteSpan bytes) {
  ByteReader r(bytes);
  if (std::memcmp(r.GetBytes(4).data(), kChecksumMagic, 4) != 0) {
    Throw(ErrorCode::kFormatError, "bad checksum file magic");
  }
  ChecksumFile f;
  f.chunk_size = r.GetU32();
  f.algorithm = r.GetU8();
  r.Skip(3);
  f.data_length = r.GetU64();
  const uint32_t count = r.GetU32();
  if (f.algorithm != kAlgorithmCrc32c || f.chunk_size == 0) {
    Throw(ErrorCode::kFormatError, "unsupported checksum parameters");
  }
  if (count != (f.data_length + f.chunk_size - 1) / f.chunk_size || r.remaining() != count * 4ull) {
    Throw(ErrorCode::kFormatError, "checksum count does not match data length");
  }
  f.sums.reserve(count);
  for (uint32_t i = 0; i < count; ++i) f.sums.push_back(r.GetU32());
  return f;
}

Bytes BuildChecksumFile(ByteSpan data) { return EncodeChecksumFile(MakeChecksumFile(data)); }

std::optional<uint64_t> FirstBadChunk(ByteSpan data, const ChecksumFile& file,
                                      uint64_t first_chunk) {
  uint64_t chunk = first_chunk;
  for (size_t off = 0; off < data.size(); off += file.chunk_size, ++chunk) {
    const size_t len = std::min<size_t>(file.chunk_size, data.size() - off);
    if (chunk >= file.sums.size() || Crc32c(data.subspan(off, len)) != file.sums[chunk]) return chunk;
  }
  return std::nullopt;
}

}  // namespace hail
