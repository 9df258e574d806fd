#include "rla/ingest.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cctype>
#include <fstream>
#include <map>
#include "json.hpp"
#include <sstream>
#include <unordered_set>

#include "rla/csv.hpp"
#include "rla/zip_reader.hpp"

namespace rla {

using json = nlohmann::json;
namespace pt = boost::property_tree;

namespace {

/// Read-only memory map of a file; pages are loaded on demand.
class MappedFile {
 public:
  explicit MappedFile(const std::filesystem::path& path) {
    fd_ = ::open(path.c_str(), O_RDONLY);
    if (fd_ < 0) throw ParseError("cannot open " + path.string());
    struct stat st {};
    if (::fstat(fd_, &st) != 0) {
      ::close(fd_);
      throw ParseError("cannot stat " + path.string());
    }
    size_ = static_cast<std::size_t>(st.st_size);
    if (size_ > 0) {
      data_ = ::mmap(nullptr, size_, PROT_READ, MAP_PRIVATE, fd_, 0);
      if (data_ == MAP_FAILED) {
        ::close(fd_);
        throw ParseError("cannot map " + path.string());
      }
    }
  }
  MappedFile(const MappedFile&) = delete;
  MappedFile& operator=(const MappedFile&) = delete;
  ~MappedFile() {
    if (data_ && data_ != MAP_FAILED) ::munmap(data_, size_);
    if (fd_ >= 0) ::close(fd_);
  }

  std::string_view view() const {
    return size_ == 0 ? std::string_view{} : std::string_view(static_cast<const char*>(data_), size_);
  }

 private:
  int fd_ = -1;
  void* data_ = nullptr;
  std::size_t size_ = 0;
};

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

/// JSON scalar used as an identifier: strings as-is, integers in decimal.
std::string id_string(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<std::int64_t>());
  if (j.is_number_unsigned()) return std::to_string(j.get<std::uint64_t>());
  throw std::invalid_argument("identifier must be a string or integer");
}

int mark_value(const json& j) {
  if (j.is_boolean()) return j.get<bool>() ? 1 : 0;
  if (j.is_number_integer() || j.is_number_unsigned()) {
    const auto v = j.get<std::int64_t>();
    if (v < 0 || v > 1000000) throw std::invalid_argument("mark out of range");
    return static_cast<int>(v);
  }
  throw std::invalid_argument("mark must be boolean or a nonnegative integer");
}

CardRecord canonical_record(const json& j, bool allow_not_found) {
  if (!j.is_object()) throw std::invalid_argument("record is not an object");
  auto id = j.find("id");
  if (id == j.end()) throw std::invalid_argument("record has no id");
  CardRecord card;
  card.id = id_string(*id);
  if (card.id.empty()) throw std::invalid_argument("record id is empty");
  auto contests = j.find("contests");
  if (contests != j.end()) {
    if (!contests->is_object()) throw std::invalid_argument("contests must be an object");
    for (const auto& [contest, marks] : contests->items()) {
      if (!marks.is_object()) throw std::invalid_argument("marks for " + contest + " must be an object");
      Marks& m = card.votes[contest];
      for (const auto& [cand, mark] : marks.items()) {
        const int v = mark_value(mark);
        if (v > 0) m[cand] = v;
      }
    }
  }
  if (auto ph = j.find("phantom"); ph != j.end()) {
    if (!ph->is_boolean()) throw std::invalid_argument("phantom must be boolean");
    card.phantom = ph->get<bool>();
  }
  if (auto nf = j.find("not_found"); nf != j.end()) {
    if (!allow_not_found) throw std::invalid_argument("not_found is only valid on manual records");
    if (!nf->is_boolean()) throw std::invalid_argument("not_found must be boolean");
    card.not_found = nf->get<bool>();
    if (card.not_found) {
      for (const auto& [contest, marks] : card.votes) {
        if (!marks.empty()) throw std::invalid_argument("a not_found record cannot carry marks");
      }
    }
  }
  return card;
}

json parse_json(std::string_view text, const std::string& source) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw ParseError(source + ": invalid JSON: " + e.what());
  }
}

CvrParse parse_record_array(std::string_view text, const std::string& source, bool manual) {
  const json doc = parse_json(text, source);
  const json* array = &doc;
  if (doc.is_object()) {
    auto it = doc.find(manual ? "mvrs" : "cvrs");
    if (it == doc.end()) it = doc.find("records");
    if (it == doc.end()) throw ParseError(source + ": expected an array of records");
    array = &*it;
  }
  if (!array->is_array()) throw ParseError(source + ": expected an array of records");
  CvrParse out;
  std::unordered_set<std::string> ids;
  std::size_t index = 0;
  for (const auto& item : *array) {
    try {
      CardRecord card = canonical_record(item, manual);
      if (!ids.insert(card.id).second) out.report.duplicate_ids.push_back(card.id);
      for (const auto& [contest, marks] : card.votes) out.report.contests_seen.insert(contest);
      out.records.push_back(std::move(card));
      ++out.report.records_read;
    } catch (const std::exception& e) {
      out.report.rejections.push_back({source + "[" + std::to_string(index) + "]", e.what()});
    }
    ++index;
  }
  return out;
}

std::string child_text(const pt::ptree& node, const std::string& name) {
  auto child = node.get_child_optional(name);
  return child ? trim(child->data()) : std::string{};
}

std::string option_or_name(const pt::ptree& node) {
  std::string id = child_text(node, "Id");
  return id.empty() ? child_text(node, "Name") : id;
}

void merge_into(CvrParse& total, CvrParse&& part) {
  total.report.records_read += part.report.records_read;
  for (auto& r : part.report.rejections) total.report.rejections.push_back(std::move(r));
  total.report.contests_seen.insert(part.report.contests_seen.begin(), part.report.contests_seen.end());
  for (auto& d : part.report.duplicate_ids) total.report.duplicate_ids.push_back(std::move(d));
  for (auto& r : part.records) total.records.push_back(std::move(r));
}

}  // namespace

CvrFormat cvr_format_from_string(const std::string& s) {
  if (s == "canonical") return CvrFormat::canonical;
  if (s == "hart_zip_xml" || s == "hart") return CvrFormat::hart_zip_xml;
  if (s == "dominion_export" || s == "dominion") return CvrFormat::dominion_export;
  throw InputError("unknown CVR format '" + s + "'");
}

std::string to_string(CvrFormat f) {
  switch (f) {
    case CvrFormat::canonical: return "canonical";
    case CvrFormat::hart_zip_xml: return "hart_zip_xml";
    case CvrFormat::dominion_export: return "dominion_export";
  }
  return "canonical";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CvrParse parse_canonical(std::string_view text, const std::string& source) {
  return parse_record_array(text, source, false);
}

CardRecord parse_hart_xml(std::string_view xml) {
  pt::ptree tree;
  std::istringstream in{std::string(xml)};
  pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
  auto root = tree.get_child_optional("Cvr");
  if (!root) throw std::invalid_argument("missing Cvr element");
  CardRecord card;
  card.id = child_text(*root, "ImprintedId");
  if (card.id.empty()) {
    const std::string batch = child_text(*root, "BatchNumber");
    const std::string sequence = child_text(*root, "BatchSequence");
    if (batch.empty() || sequence.empty()) throw std::invalid_argument("card has no ImprintedId or BatchNumber/BatchSequence");
    card.id = batch + "-" + sequence;
  }
  if (auto contests = root->get_child_optional("Contests")) {
    for (const auto& [tag, contest] : *contests) {
      if (tag != "Contest") continue;
      const std::string contest_id = option_or_name(contest);
      if (contest_id.empty()) throw std::invalid_argument("contest without Id or Name");
      Marks& marks = card.votes[contest_id];
      auto options = contest.get_child_optional("Options");
      if (!options) continue;
      for (const auto& [otag, option] : *options) {
        if (otag != "Option") continue;
        const std::string cand = option_or_name(option);
        if (cand.empty()) throw std::invalid_argument("option without Id or Name in " + contest_id);
        std::string value = child_text(option, "Rank");
        if (value.empty()) value = child_text(option, "Value");
        int mark = 1;
        if (!value.empty()) {
          std::size_t used = 0;
          mark = std::stoi(value, &used);
          if (used != value.size() || mark < 0) throw std::invalid_argument("bad option value '" + value + "'");
        }
        if (mark > 0) marks[cand] = mark;
      }
    }
  }
  return card;
}

CvrParse parse_hart_zip(std::string_view archive, const std::string& source) {
  CvrParse out;
  ZipReader zip(archive);
  std::unordered_set<std::string> ids;
  zip.for_each(
      [&](const ZipReader::Member& member, const std::string& data) {
        const auto& name = member.name;
        if (name.size() < 4 || lower(name.substr(name.size() - 4)) != ".xml") return;
        try {
          CardRecord card = parse_hart_xml(data);
          if (!ids.insert(card.id).second) out.report.duplicate_ids.push_back(card.id);
          for (const auto& [contest, marks] : card.votes) out.report.contests_seen.insert(contest);
          out.records.push_back(std::move(card));
          ++out.report.records_read;
        } catch (const std::exception& e) {
          out.report.rejections.push_back({source + ":" + name, e.what()});
        }
      },
      [&](const ZipReader::Member& member, const std::string& message) {
        out.report.rejections.push_back({source + ":" + member.name, message});
      });
  return out;
}

CvrParse parse_dominion(std::string_view text, const std::string& source) {
  const json doc = parse_json(text, source);
  if (!doc.is_object()) throw ParseError(source + ": expected an export object");
  auto sessions = doc.find("Sessions");
  if (sessions == doc.end() || !sessions->is_array()) throw ParseError(source + ": missing Sessions array");
  CvrParse out;
  std::unordered_set<std::string> ids;
  std::size_t index = 0;
  for (const auto& session : *sessions) {
    try {
      if (!session.is_object()) throw std::invalid_argument("session is not an object");
      const std::string base = id_string(session.at("TabulatorId")) + "-" + id_string(session.at("BatchId")) + "-" +
                               id_string(session.at("RecordId"));
      const json* body = nullptr;
      if (auto m = session.find("Modified"); m != session.end() && m->is_object()) body = &*m;
      if (!body) body = &session.at("Original");
      const json& cards = body->at("Cards");
      if (!cards.is_array() || cards.empty()) throw std::invalid_argument("session has no cards");
      std::vector<CardRecord> parsed;
      for (std::size_t k = 0; k < cards.size(); ++k) {
        CardRecord card;
        card.id = cards.size() == 1 ? base : base + "-" + std::to_string(k + 1);
        for (const auto& contest : cards[k].at("Contests")) {
          const std::string contest_id = id_string(contest.at("Id"));
          Marks& marks = card.votes[contest_id];
          bool overvoted = false;
          if (auto ov = contest.find("Overvotes"); ov != contest.end() && ov->is_number()) overvoted = ov->get<double>() > 0;
          auto mark_list = contest.find("Marks");
          if (mark_list == contest.end()) continue;
          for (const auto& mark : *mark_list) {
            const std::string cand = id_string(mark.at("CandidateId"));
            bool is_vote = true;
            if (auto iv = mark.find("IsVote"); iv != mark.end()) is_vote = iv->get<bool>();
            if (!is_vote && !overvoted) continue;
            int rank = 1;
            if (auto r = mark.find("Rank"); r != mark.end()) rank = mark_value(*r);
            if (rank > 0) marks[cand] = rank;
          }
        }
        parsed.push_back(std::move(card));
      }
      for (auto& card : parsed) {
        if (!ids.insert(card.id).second) out.report.duplicate_ids.push_back(card.id);
        for (const auto& [contest, marks] : card.votes) out.report.contests_seen.insert(contest);
        out.records.push_back(std::move(card));
        ++out.report.records_read;
      }
    } catch (const std::exception& e) {
      out.report.rejections.push_back({source + ":Sessions[" + std::to_string(index) + "]", e.what()});
    }
    ++index;
  }
  return out;
}

CvrParse parse_cvrs_text(CvrFormat format, std::string_view data, const std::string& source) {
  switch (format) {
    case CvrFormat::canonical: return parse_canonical(data, source);
    case CvrFormat::hart_zip_xml: return parse_hart_zip(data, source);
    case CvrFormat::dominion_export: return parse_dominion(data, source);
  }
  return {};
}

CvrParse parse_cvrs(CvrFormat format, const std::vector<std::filesystem::path>& paths) {
  CvrParse total;
  for (const auto& path : paths) {
    MappedFile file(path);
    try {
      merge_into(total, parse_cvrs_text(format, file.view(), path.filename().string()));
    } catch (const ZipError& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }
  std::unordered_set<std::string> ids;
  std::set<std::string> dups(total.report.duplicate_ids.begin(), total.report.duplicate_ids.end());
  for (const auto& card : total.records) {
    if (!ids.insert(card.id).second) dups.insert(card.id);
  }
  total.report.duplicate_ids.assign(dups.begin(), dups.end());
  if (!dups.empty()) throw ParseError("duplicate card id across CVR files: " + *dups.begin());
  return total;
}

CvrParse parse_cvrs(CvrFormat format, const std::filesystem::path& path) {
  return parse_cvrs(format, std::vector<std::filesystem::path>{path});
}

std::string serialize_canonical(const std::vector<CardRecord>& records) {
  json array = json::array();
  for (const auto& card : records) {
    json j;
    j["id"] = card.id;
    json contests = json::object();
    for (const auto& [contest, marks] : card.votes) {
      json m = json::object();
      for (const auto& [cand, mark] : marks) m[cand] = mark;
      contests[contest] = std::move(m);
    }
    j["contests"] = std::move(contests);
    if (card.phantom) j["phantom"] = true;
    if (card.not_found) j["not_found"] = true;
    array.push_back(std::move(j));
  }
  return array.dump(2) + "\n";
}

BallotManifest parse_manifest_text(std::string_view text) {
  static const std::vector<std::string> kColumns = {"container", "tabulator", "batch", "card_count", "id_prefix"};
  BallotManifest manifest;
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<int> column_of(kColumns.size(), -1);
  bool have_header = false;
  std::size_t row = 0;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> seen;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    try {
      fields = split_csv_line(line);
    } catch (const std::invalid_argument& e) {
      throw ParseError("manifest row " + std::to_string(row) + ": " + e.what());
    }
    for (auto& f : fields) f = trim(f);
    if (!have_header) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        auto it = std::find(kColumns.begin(), kColumns.end(), lower(fields[i]));
        if (it != kColumns.end()) column_of[it - kColumns.begin()] = static_cast<int>(i);
      }
      for (std::size_t c = 0; c < kColumns.size(); ++c) {
        if (column_of[c] < 0) throw ParseError("manifest header lacks column '" + kColumns[c] + "'");
      }
      have_header = true;
      continue;
    }
    auto field = [&](std::size_t c) -> const std::string& {
      const auto idx = static_cast<std::size_t>(column_of[c]);
      if (idx >= fields.size()) throw ParseError("manifest row " + std::to_string(row) + ": missing " + kColumns[c]);
      return fields[idx];
    };
    ManifestEntry e;
    e.container = field(0);
    e.tabulator = field(1);
    e.batch = field(2);
    const std::string& count = field(3);
    if (count.empty() || count.size() > 15 ||
        !std::all_of(count.begin(), count.end(), [](unsigned char c) { return std::isdigit(c); }))
      throw ParseError("manifest row " + std::to_string(row) + ": card_count '" + count + "' is not a count");
    e.card_count = std::stoll(count);
    e.id_prefix = field(4);
    auto key = std::make_tuple(e.container, e.tabulator, e.batch);
    if (auto [it, inserted] = seen.emplace(key, row); !inserted)
      throw ParseError("manifest rows " + std::to_string(it->second) + " and " + std::to_string(row) +
                       " repeat the same container, tabulator and batch");
    manifest.total_cards += e.card_count;
    manifest.entries.push_back(std::move(e));
  }
  if (manifest.entries.empty()) throw ParseError("no manifest rows");
  return manifest;
}

BallotManifest parse_manifest(const std::filesystem::path& path) { return parse_manifest_text(read_file(path)); }

CvrParse parse_mvrs_text(std::string_view text, const std::set<std::string>* known_ids, const std::string& source) {
  CvrParse parsed = parse_record_array(text, source, true);
  if (!known_ids) return parsed;
  CvrParse out;
  out.report = parsed.report;
  out.report.records_read = 0;
  for (auto& card : parsed.records) {
    if (!known_ids->count(card.id)) {
      out.report.rejections.push_back({source, "unknown card id " + card.id});
      continue;
    }
    ++out.report.records_read;
    out.records.push_back(std::move(card));
  }
  return out;
}

CvrParse parse_mvrs(const std::filesystem::path& path, const std::set<std::string>* known_ids) {
  return parse_mvrs_text(read_file(path), known_ids, path.filename().string());
}

std::vector<RaireEntry> parse_raire_text(std::string_view text) {
  const json doc = parse_json(text, "RAIRE file");
  const json* list = &doc;
  if (doc.is_object()) {
    if (auto it = doc.find("assertions"); it != doc.end()) {
      list = &*it;
    } else if (doc.contains("solution") && doc["solution"].is_object() && doc["solution"].contains("Ok") &&
               doc["solution"]["Ok"].is_object() && doc["solution"]["Ok"].contains("assertions")) {
      list = &doc["solution"]["Ok"]["assertions"];
    } else {
      throw ParseError("RAIRE file has no assertions");
    }
  }
  if (!list->is_array()) throw ParseError("RAIRE assertions must be an array");
  std::vector<RaireEntry> out;
  std::size_t index = 0;
  for (const auto& item : *list) {
    try {
      const json& a = item.is_object() && item.contains("assertion") ? item.at("assertion") : item;
      RaireEntry e;
      const std::string type = a.at("type").get<std::string>();
      if (type == "NEB") {
        e.type = RaireEntry::Type::neb;
      } else if (type == "NEN") {
        e.type = RaireEntry::Type::nen;
      } else {
        throw std::invalid_argument("unknown assertion type '" + type + "'");
      }
      e.winner = id_string(a.at("winner"));
      e.loser = id_string(a.at("loser"));
      if (e.type == RaireEntry::Type::nen) {
        for (const auto& c : a.at("continuing")) e.continuing.push_back(id_string(c));
      }
      out.push_back(std::move(e));
    } catch (const std::exception& e) {
      throw ParseError("RAIRE entry " + std::to_string(index) + ": " + e.what());
    }
    ++index;
  }
  return out;
}

std::vector<RaireEntry> parse_raire(const std::filesystem::path& path) { return parse_raire_text(read_file(path)); }

}  // namespace rla
