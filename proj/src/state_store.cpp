#include "rla/state_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "rla/ingest.hpp"

namespace rla {

using json = nlohmann::json;

namespace {

constexpr const char* kEvents = "events.jsonl";
constexpr const char* kSnapshot = "state.json";
constexpr const char* kCards = "cards.json";

bool changes_cards(const json& event) {
  const std::string type = event.at("type").get<std::string>();
  return type == "init" || type == "check" || type == "seed";
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

StateStore::StateStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  const std::string lock_path = (dir_ / ".lock").string();
  lock_fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (lock_fd_ < 0) throw std::runtime_error("cannot open " + lock_path);
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(lock_fd_);
    lock_fd_ = -1;
    throw InputError("state directory " + dir_.string() + " is locked by another process");
  }
}

StateStore::~StateStore() {
  if (lock_fd_ >= 0) {
    ::flock(lock_fd_, LOCK_UN);
    ::close(lock_fd_);
  }
}

bool StateStore::exists() const { return std::filesystem::exists(dir_ / kEvents); }

std::vector<json> StateStore::read_events() const {
  std::ifstream in(dir_ / kEvents, std::ios::binary);
  if (!in) throw InputError("no audit in " + dir_.string() + "; run init first");
  std::vector<json> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    events.push_back(json::parse(line));
  }
  return events;
}

AuditState StateStore::replay_log() const { return replay(read_events()); }

AuditState StateStore::load() const {
  auto events = read_events();
  const auto snapshot = dir_ / kSnapshot;
  const auto cards_path = dir_ / kCards;
  if (std::filesystem::exists(snapshot) && std::filesystem::exists(cards_path)) {
    json j = json::parse(read_file(snapshot));
    if (j.value("events", std::size_t{0}) == events.size()) {
      std::vector<CardRecord> cards;
      for (const auto& c : json::parse(read_file(cards_path))) cards.push_back(card_from_json(c));
      AuditState state = state_from_json(j, std::move(cards));
      state.log = std::move(events);
      return state;
    }
  }
  return replay(events);
}

void StateStore::save(const AuditState& state) {
  std::size_t on_disk = exists() ? read_events().size() : 0;
  if (on_disk > state.log.size()) throw std::runtime_error("event log on disk is ahead of the state being saved");
  bool cards_changed = !std::filesystem::exists(dir_ / kCards);
  if (on_disk < state.log.size()) {
    std::ofstream out(dir_ / kEvents, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot append to " + (dir_ / kEvents).string());
    for (std::size_t i = on_disk; i < state.log.size(); ++i) {
      out << state.log[i].dump() << '\n';
      cards_changed = cards_changed || changes_cards(state.log[i]);
    }
    out.flush();
    if (!out) throw std::runtime_error("event log write failed");
  }
  if (cards_changed) {
    json cards = json::array();
    for (const auto& c : state.cards) cards.push_back(card_to_json(c));
    write_file_atomic(dir_ / kCards, cards.dump() + "\n");
  }
  write_file_atomic(dir_ / kSnapshot, state_to_json(state).dump(2) + "\n");
}

}  // namespace rla
