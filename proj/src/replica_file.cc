#include "hail/replica_file.h"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hail/error.h"

namespace hail {

void IoStats::Reset() {
  block_writes = 0;
  block_bytes_written = 0;
  checksum_writes = 0;
  block_reads = 0;
  block_bytes_read = 0;
}

std::filesystem::path ChecksumPathFor(const std::filesystem::path& block_path) {
  std::filesystem::path p = block_path;
  p.replace_extension(".crc");
  return p;
}

namespace {

Bytes SlurpFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Throw(ErrorCode::kReadFailed, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

ReplicaFile::ReplicaFile(const std::filesystem::path& path, AliveFn alive, IoStats* stats)
    : path_(path), alive_(std::move(alive)), stats_(stats) {
  CheckAlive();
  fd_ = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd_ < 0) Throw(ErrorCode::kReadFailed, "cannot open " + path.string() + ": " + std::strerror(errno));
  struct stat st {};
  if (::fstat(fd_, &st) != 0) {
    ::close(fd_);
    Throw(ErrorCode::kReadFailed, "cannot stat " + path.string());
  }
  size_ = static_cast<uint64_t>(st.st_size);
  try {
    crc_ = DecodeChecksumFile(SlurpFile(ChecksumPathFor(path)));
    if (crc_.data_length != size_) {
      Throw(ErrorCode::kReadFailed, path.string() + " does not match its checksum file length");
    }
    const Bytes prefix = ReadRange(0, std::min<uint64_t>(size_, kHeaderPrefixLength));
    const uint64_t header_length = PeekHeaderLength(prefix);
    if (header_length > size_) Throw(ErrorCode::kFormatError, "header longer than block");
    header_ = ParseHeader(ReadRange(0, header_length));
    if (header_.file_size() != size_) Throw(ErrorCode::kFormatError, "block sections do not cover the file");
  } catch (const HailError& e) {
    ::close(fd_);
    fd_ = -1;
    if (e.code() == ErrorCode::kReadFailed) throw;
    Throw(ErrorCode::kReadFailed, path.string() + ": " + e.what());
  }
}

ReplicaFile::~ReplicaFile() {
  if (fd_ >= 0) ::close(fd_);
}

void ReplicaFile::CheckAlive() const {
  if (alive_ && !alive_()) Throw(ErrorCode::kReadFailed, "datanode hosting " + path_.filename().string() + " is down");
}

const std::optional<IndexSection>& ReplicaFile::index() {
  if (!index_loaded_) {
    const Extent& e = header_.index_section;
    if (e.length > 0) {
      try {
        index_ = DecodeIndexSection(ReadRange(e.offset, e.length), header_.schema);
      } catch (const HailError& err) {
        if (err.code() == ErrorCode::kReadFailed) throw;
        Throw(ErrorCode::kReadFailed, path_.string() + ": " + err.what());
      }
    }
    index_loaded_ = true;
  }
  return index_;
}

std::vector<std::string> ReplicaFile::ReadBadRows() {
  const Extent& e = header_.bad_region;
  const Bytes region = ReadRange(e.offset, e.length);
  ByteReader r(region);
  std::vector<std::string> rows;
  for (uint64_t i = 0; i < header_.bad_count; ++i) rows.push_back(r.GetString(r.GetU32()));
  return rows;
}

Bytes ReplicaFile::ReadRange(uint64_t offset, uint64_t length) {
  CheckAlive();
  if (offset > size_ || length > size_ - offset) Throw(ErrorCode::kReadFailed, "read past end of " + path_.string());
  if (length == 0) return {};
  const uint64_t cs = crc_.chunk_size;
  const uint64_t first_chunk = offset / cs;
  const uint64_t begin = first_chunk * cs;
  const uint64_t end = std::min(size_, ((offset + length + cs - 1) / cs) * cs);
  Bytes buf(end - begin);
  uint64_t done = 0;
  while (done < buf.size()) {
    const ssize_t n = ::pread(fd_, buf.data() + done, buf.size() - done, static_cast<off_t>(begin + done));
    if (n <= 0) Throw(ErrorCode::kReadFailed, "short read on " + path_.string());
    done += static_cast<uint64_t>(n);
  }
  if (stats_ != nullptr) {
    stats_->block_reads++;
    stats_->block_bytes_read += buf.size();
  }
  if (std::optional<uint64_t> bad = FirstBadChunk(buf, crc_, first_chunk)) {
    Throw(ErrorCode::kReadFailed, "checksum mismatch in chunk " + std::to_string(*bad) + " of " + path_.string());
  }
  CheckAlive();
  return Bytes(buf.begin() + (offset - begin), buf.begin() + (offset - begin + length));
}

Bytes ReplicaFile::DoRead(int position, uint64_t offset, uint64_t length) {
  const Extent& col = header_.column(position);
  if (offset > col.length || length > col.length - offset) {
    Throw(ErrorCode::kReadFailed, "column read past end");
  }
  return ReadRange(col.offset + offset, length);
}

}  // namespace hail
