#include "rla/zip_reader.hpp"

#include <zlib.h>

#include <cstring>
#include <vector>

namespace rla {

namespace {

constexpr std::uint32_t kEndOfCentralDir = 0x06054b50;
constexpr std::uint32_t kCentralHeader = 0x02014b50;
constexpr std::uint32_t kLocalHeader = 0x04034b50;
// Members larger than this are refused rather than inflated.
constexpr std::uint64_t kMaxMemberSize = std::uint64_t{1} << 31;

std::uint16_t read16(std::string_view data, std::size_t at) {
  if (at + 2 > data.size()) throw ZipError("truncated archive");
  return static_cast<std::uint16_t>(static_cast<unsigned char>(data[at]) |
                                    (static_cast<unsigned char>(data[at + 1]) << 8));
}

std::uint32_t read32(std::string_view data, std::size_t at) {
  if (at + 4 > data.size()) throw ZipError("truncated archive");
  return static_cast<std::uint32_t>(read16(data, at)) | (static_cast<std::uint32_t>(read16(data, at + 2)) << 16);
}

}  // namespace

ZipReader::ZipReader(std::string_view archive) : archive_(archive) {
  if (archive.size() < 22) throw ZipError("not a zip archive");
  // The end-of-central-directory record is followed by at most a 64 KiB comment.
  std::size_t eocd = std::string_view::npos;
  const std::size_t lowest = archive.size() > 22 + 0xffff ? archive.size() - 22 - 0xffff : 0;
  for (std::size_t at = archive.size() - 22;; --at) {
    if (read32(archive, at) == kEndOfCentralDir) {
      eocd = at;
      break;
    }
    if (at == lowest) break;
  }
  if (eocd == std::string_view::npos) throw ZipError("not a zip archive");

  const std::uint16_t count = read16(archive, eocd + 10);
  const std::uint32_t dir_size = read32(archive, eocd + 12);
  const std::uint32_t dir_offset = read32(archive, eocd + 16);
  if (count == 0xffff || dir_offset == 0xffffffff) throw ZipError("zip64 archives are not supported");
  if (static_cast<std::uint64_t>(dir_offset) + dir_size > eocd) throw ZipError("corrupt central directory");

  std::size_t at = dir_offset;
  members_.reserve(count);
  for (std::uint16_t i = 0; i < count; ++i) {
    if (read32(archive, at) != kCentralHeader) throw ZipError("corrupt central directory entry");
    Member m;
    const std::uint16_t flags = read16(archive, at + 8);
    m.method = read16(archive, at + 10);
    m.crc32 = read32(archive, at + 16);
    m.compressed_size = read32(archive, at + 20);
    m.uncompressed_size = read32(archive, at + 24);
    const std::uint16_t name_len = read16(archive, at + 28);
    const std::uint16_t extra_len = read16(archive, at + 30);
    const std::uint16_t comment_len = read16(archive, at + 32);
    m.local_header_offset = read32(archive, at + 42);
    if (at + 46 + name_len > archive.size()) throw ZipError("truncated central directory");
    m.name = std::string(archive.substr(at + 46, name_len));
    if (flags & 0x1) throw ZipError("encrypted member: " + m.name);
    members_.push_back(std::move(m));
    at += 46 + static_cast<std::size_t>(name_len) + extra_len + comment_len;
  }
}

std::string ZipReader::extract(const Member& member) const {
  const std::size_t at = member.local_header_offset;
  if (read32(archive_, at) != kLocalHeader) throw ZipError("bad local header for " + member.name);
  const std::uint16_t name_len = read16(archive_, at + 26);
  const std::uint16_t extra_len = read16(archive_, at + 28);
  const std::uint64_t start = at + 30 + static_cast<std::uint64_t>(name_len) + extra_len;
  if (start + member.compressed_size > archive_.size()) throw ZipError("member data truncated: " + member.name);
  if (member.uncompressed_size > kMaxMemberSize) throw ZipError("member too large: " + member.name);
  // Deflate cannot expand data by more than about 1032:1.
  if (member.uncompressed_size > member.compressed_size * 1040 + 1024)
    throw ZipError("implausible size for " + member.name);
  const std::string_view packed = archive_.substr(start, member.compressed_size);

  std::string out;
  if (member.method == 0) {
    out.assign(packed);
  } else if (member.method == 8) {
    out.resize(member.uncompressed_size);
    z_stream zs{};
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw ZipError("inflate init failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(packed.data()));
    zs.avail_in = static_cast<uInt>(packed.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = inflate(&zs, Z_FINISH);
    const auto produced = zs.total_out;
    inflateEnd(&zs);
    if (rc != Z_STREAM_END) throw ZipError("corrupt deflate data in " + member.name);
    out.resize(produced);
  } else {
    throw ZipError("unsupported compression method " + std::to_string(member.method) + " in " + member.name);
  }
  if (out.size() != member.uncompressed_size) throw ZipError("size mismatch in " + member.name);
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(out.data()), static_cast<uInt>(out.size()));
  if (crc != member.crc32) throw ZipError("CRC mismatch in " + member.name);
  return out;
}

void ZipReader::for_each(const std::function<void(const Member&, const std::string&)>& fn,
                         const std::function<void(const Member&, const std::string&)>& on_error) const {
  for (const auto& member : members_) {
    if (!member.name.empty() && member.name.back() == '/') continue;
    std::string data;
    try {
      data = extract(member);
    } catch (const ZipError& e) {
      on_error(member, e.what());
      continue;
    }
    fn(member, data);
  }
}

}  // namespace rla
