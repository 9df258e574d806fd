#pragma once

// On-disk audit state: an append-only event log (events.jsonl), a snapshot of
// the derived state (state.json) and the card records (cards.json). The store
// holds an exclusive lock on its directory for its lifetime.

#include <filesystem>
#include <string>

#include "rla/engine.hpp"

namespace rla {

class StateStore {
 public:
  /// Creates the directory if needed and locks it. Throws InputError when
  /// another process holds the lock.
  explicit StateStore(std::filesystem::path dir);
  ~StateStore();
  StateStore(const StateStore&) = delete;
  StateStore& operator=(const StateStore&) = delete;

  bool exists() const;
  /// Loads the snapshot, or replays the log when the snapshot is behind it.
  AuditState load() const;
  /// Rebuilds the state from the event log alone.
  AuditState replay_log() const;
  /// Appends events not yet on disk and rewrites the snapshot.
  void save(const AuditState& state);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::vector<nlohmann::json> read_events() const;

  std::filesystem::path dir_;
  int lock_fd_ = -1;
};

/// Writes `contents` to `path` via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace rla
