#pragma once

// Readers for cast-vote records, manual-vote records, ballot manifests and
// RAIRE assertion files. Every reader has an in-memory form (used by the
// fuzz tests) and a path form.

#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rla/assertions.hpp"
#include "rla/model.hpp"

namespace rla {

/// Structural failure of an input file: the whole parse is refused.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CvrFormat { canonical, hart_zip_xml, dominion_export };
CvrFormat cvr_format_from_string(const std::string& s);
std::string to_string(CvrFormat f);

struct Rejection {
  std::string location;  ///< file plus record offset or archive member
  std::string reason;
};

struct ParseReport {
  std::int64_t records_read = 0;
  std::vector<Rejection> rejections;
  std::set<std::string> contests_seen;
  std::vector<std::string> duplicate_ids;
};

struct CvrParse {
  std::vector<CardRecord> records;
  ParseReport report;
};

/// Canonical records: a JSON array of {"id", "contests": {contest: {candidate: mark}}}
/// with optional "phantom" and (for manual records) "not_found".
CvrParse parse_canonical(std::string_view text, const std::string& source = "<memory>");
/// Zip archive, one Hart-style XML document per card.
CvrParse parse_hart_zip(std::string_view archive, const std::string& source = "<memory>");
/// One Hart-style XML card document.
CardRecord parse_hart_xml(std::string_view xml);
/// Dominion-style JSON export with a "Sessions" array.
CvrParse parse_dominion(std::string_view text, const std::string& source = "<memory>");

CvrParse parse_cvrs_text(CvrFormat format, std::string_view data, const std::string& source = "<memory>");

/// Reads and merges CVR files. Throws ParseError when a card id repeats
/// across (or within) files.
CvrParse parse_cvrs(CvrFormat format, const std::vector<std::filesystem::path>& paths);
CvrParse parse_cvrs(CvrFormat format, const std::filesystem::path& path);

/// Canonical serialization: sorted keys, two-space indent, trailing newline.
std::string serialize_canonical(const std::vector<CardRecord>& records);

/// Header: container,tabulator,batch,card_count,id_prefix. Throws ParseError.
BallotManifest parse_manifest_text(std::string_view text);
BallotManifest parse_manifest(const std::filesystem::path& path);

/// Manual records in canonical shape. Records naming a card outside
/// `known_ids` are rejected (listed in the report), as are records flagged
/// not_found that carry marks.
CvrParse parse_mvrs_text(std::string_view text, const std::set<std::string>* known_ids,
                         const std::string& source = "<memory>");
CvrParse parse_mvrs(const std::filesystem::path& path, const std::set<std::string>* known_ids);

/// {"assertions": [{"type": "NEB"|"NEN", "winner", "loser", "continuing": [...]}]}
/// or a bare array of entries.
std::vector<RaireEntry> parse_raire_text(std::string_view text);
std::vector<RaireEntry> parse_raire(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

}  // namespace rla
