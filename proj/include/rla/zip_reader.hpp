#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rla {

class ZipError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads a zip archive member by member; only one member's data is held in
/// memory at a time. Supports stored and deflated members (no zip64, no
/// encryption).
class ZipReader {
 public:
  struct Member {
    std::string name;
    std::uint16_t method = 0;
    std::uint32_t crc32 = 0;
    std::uint64_t compressed_size = 0;
    std::uint64_t uncompressed_size = 0;
    std::uint64_t local_header_offset = 0;
  };

  /// Opens an archive from memory. The bytes must outlive the reader.
  explicit ZipReader(std::string_view archive);

  const std::vector<Member>& members() const { return members_; }

  /// Decompresses one member, verifying its CRC. Throws ZipError.
  std::string extract(const Member& member) const;

  /// Calls `fn(member, data)` for each member; members that fail to
  /// extract are reported through `on_error(member, message)`.
  void for_each(const std::function<void(const Member&, const std::string&)>& fn,
                const std::function<void(const Member&, const std::string&)>& on_error) const;

 private:
  std::string_view archive_;
  std::vector<Member> members_;
};

}  // namespace rla
