#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace rla {

/// A 256-bit unsigned integer stored big-endian, so byte-wise ordering is
/// numeric ordering.
class SampleNumber {
 public:
  using Bytes = std::array<std::uint8_t, 32>;

  SampleNumber() = default;
  explicit SampleNumber(const Bytes& bytes) : bytes_(bytes) {}

  static SampleNumber max();
  static SampleNumber from_hex(std::string_view hex);

  const Bytes& bytes() const { return bytes_; }
  std::string to_hex() const;
  /// Most significant 32 bits.
  std::uint32_t top32() const;

  auto operator<=>(const SampleNumber&) const = default;

 private:
  Bytes bytes_{};
};

/// SHA-256 of `seed ":" card_id`.
SampleNumber hash_sample_number(std::string_view seed, std::string_view card_id);

/// Hex SHA-256 digest of arbitrary bytes.
std::string sha256_hex(std::string_view data);

/// Hex SHA-256 digest of a file, read in chunks.
std::string sha256_file(const std::string& path);

}  // namespace rla
