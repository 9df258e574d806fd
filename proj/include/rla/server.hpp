#pragma once

// HTTP API over one audit's state directory. Reads see a consistent snapshot;
// mutations are serialized, and a mutation arriving while another runs gets 409.

#include <memory>
#include <mutex>
#include <string>

#include "rla/engine.hpp"
#include "rla/state_store.hpp"

namespace httplib {
class Server;
}

namespace rla {

class ApiServer {
 public:
  /// `token` guards every mutating route; it must be nonempty.
  ApiServer(StateStore& store, std::string token);
  ~ApiServer();

  /// Binds to `port` (0 picks a free one) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Call after bind.
  bool listen();
  void stop();

  std::shared_ptr<const AuditState> snapshot() const;

 private:
  void routes();

  StateStore& store_;
  std::string token_;
  std::unique_ptr<httplib::Server> http_;
  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const AuditState> current_;
  std::mutex write_mutex_;
};

}  // namespace rla
