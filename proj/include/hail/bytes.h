#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hail/error.h"

namespace hail {

using Bytes = std::vector<uint8_t>;
using ByteSpan = std::span<const uint8_t>;

// Little-endian append-only encoder used by every on-disk and wire format.
class ByteWriter {
 public:
  explicit ByteWriter(Bytes* out) : out_(out) {}

  void PutU8(uint8_t v) { out_->push_back(v); }
  void PutU16(uint16_t v) { PutLittleEndian(v); }
  void PutU32(uint32_t v) { PutLittleEndian(v); }
  void PutU64(uint64_t v) { PutLittleEndian(v); }
  void PutBytes(ByteSpan bytes) { out_->insert(out_->end(), bytes.begin(), bytes.end()); }
  void PutString(std::string_view s) {
    out_->insert(out_->end(), s.begin(), s.end());
  }
  void PutZeros(size_t n) { out_->insert(out_->end(), n, 0); }

  size_t size() const { return out_->size(); }

  // Overwrites a previously reserved u64 slot.
  void PatchU64(size_t at, uint64_t v) {
    for (int i = 0; i < 8; ++i) (*out_)[at + i] = static_cast<uint8_t>(v >> (8 * i));
  }

 private:
  template <typename T>
  void PutLittleEndian(T v) {
    for (size_t i = 0; i < sizeof(T); ++i) out_->push_back(static_cast<uint8_t>(v >> (8 * i)));
  }

  Bytes* out_;
};

// Bounds-checked decoder; any overrun is a FORMAT_ERROR.
class ByteReader {
 public:
  explicit ByteReader(ByteSpan data) : data_(data) {}

  uint8_t GetU8() { return static_cast<uint8_t>(GetLittleEndian<uint8_t>()); }
  uint16_t GetU16() { return GetLittleEndian<uint16_t>(); }
  uint32_t GetU32() { return GetLittleEndian<uint32_t>(); }
  uint64_t GetU64() { return GetLittleEndian<uint64_t>(); }

  ByteSpan GetBytes(size_t n) {
    Require(n);
    ByteSpan out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::string GetString(size_t n) {
    ByteSpan b = GetBytes(n);
    return std::string(reinterpret_cast<const char*>(b.data()), b.size());
  }
  void Skip(size_t n) {
    Require(n);
    pos_ += n;
  }

  size_t position() const { return pos_; }
  size_t remaining() const { return data_.size() - pos_; }

 private:
  void Require(size_t n) const {
    if (n > data_.size() - pos_) {
      Throw(ErrorCode::kFormatError, "truncated input: need " + std::to_string(n) +
                                         " bytes at offset " + std::to_string(pos_));
    }
  }

  template <typename T>
  T GetLittleEndian() {
    Require(sizeof(T));
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(data_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }

  ByteSpan data_;
  size_t pos_ = 0;
};

inline uint32_t LoadU32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

inline uint64_t LoadU64(const uint8_t* p) {
  return static_cast<uint64_t>(LoadU32(p)) | static_cast<uint64_t>(LoadU32(p + 4)) << 32;
}

inline void StoreU32(uint8_t* p, uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<uint8_t>(v >> (8 * i));
}

inline void StoreU64(uint8_t* p, uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<uint8_t>(v >> (8 * i));
}

}  // namespace hail
