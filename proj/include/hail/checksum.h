#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hail/bytes.h"

namespace hail {

inline constexpr uint32_t kChunkSize = 512;
inline constexpr char kChecksumMagic[4] = {'H', 'C', 'R', 'C'};
inline constexpr uint8_t kAlgorithmCrc32c = 1;
inline constexpr size_t kChecksumHeaderLength = 24;

uint32_t Crc32c(ByteSpan data);

// One CRC32C per chunk; the last chunk may be short.
std::vector<uint32_t> ChunkChecksums(ByteSpan data, uint32_t chunk_size = kChunkSize);

// The `.crc` sibling of a stored block.
struct ChecksumFile {
  uint32_t chunk_size = kChunkSize;
  uint8_t algorithm = kAlgorithmCrc32c;
  uint64_t data_length = 0;
  std::vector<uint32_t> sums;

  bool operator==(const ChecksumFile&) const = default;
};

ChecksumFile MakeChecksumFile(ByteSpan data);
Bytes EncodeChecksumFile(const ChecksumFile& file);
ChecksumFile DecodeChecksumFile(ByteSpan bytes);

// Encoded `.crc` contents for `data`.
Bytes BuildChecksumFile(ByteSpan data);

// Index of the first chunk of `data` that disagrees with `sums`, where
// `data` starts at chunk `first_chunk` of the stored block.
std::optional<uint64_t> FirstBadChunk(ByteSpan data, const ChecksumFile& file,
                                      uint64_t first_chunk = 0);

}  // namespace hail
