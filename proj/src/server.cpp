#include "rla/server.hpp"

#include <stdexcept>

#include "httplib.h"
#include "json.hpp"
#include "rla/ingest.hpp"
#include "rla/report.hpp"

namespace rla {

using json = nlohmann::json;

namespace {

struct ApiError {
  int status;
  std::string message;
  std::vector<std::string> ids;
};

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message,
                const std::vector<std::string>& ids = {}) {
  json body = {{"error", message}};
  if (!ids.empty()) body["ids"] = ids;
  send_json(res, body, status);
}

json state_summary(const AuditState& s) {
  json contests = json::array();
  for (const auto& c : s.contests) contests.push_back({{"id", c.id}, {"status", to_string(c.status)}});
  return {{"round", s.rounds.size()},
          {"measured_round", s.measured_round},
          {"checked", s.checked},
          {"seeded", s.seeded()},
          {"cards", s.cards.size()},
          {"manual_records", s.mvrs.size()},
          {"events", s.log.size()},
          {"warnings", s.warnings},
          {"contests", contests}};
}

json contests_json(const AuditState& s) {
  json out = json::array();
  for (const auto& c : s.contests) {
    json j = to_json(c);
    j["diluted_margin"] = contest_margin(s, c.id);
    if (auto e = s.estimates.find(c.id); e != s.estimates.end()) {
      j["estimated_sample_size"] = e->second.with_errors;
      j["zero_error_sample_size"] = e->second.zero_error;
    }
    if (!s.rounds.empty()) {
      auto t = s.rounds.back().targets.find(c.id);
      if (t != s.rounds.back().targets.end()) j["current_target"] = t->second;
    }
    if (auto h = s.hand_counts.find(c.id); h != s.hand_counts.end())
      j["hand_count"] = {{"winners", h->second.winners}, {"tie", h->second.tie}, {"cards_counted", h->second.cards_counted}};
    out.push_back(j);
  }
  return out;
}

json assertions_json(const AuditState& s) {
  json out = json::array();
  for (const auto& a : s.assertions) {
    out.push_back({{"id", a.id()},
                   {"contest", a.contest_id},
                   {"margin", a.margin},
                   {"status", to_string(a.status)},
                   {"draws", a.tracker ? a.tracker->draws : 0},
                   {"p_value", a.tracker ? p_value(*a.tracker) : 1.0}});
  }
  return out;
}

json plan_json(const RoundPlan& plan) {
  return {{"round", plan.round},
          {"targets", plan.targets},
          {"fractions", plan.fractions},
          {"selected_cards", plan.selected.size()},
          {"estimated_total", plan.estimated_total}};
}

json retrieval_json(int round, const RetrievalList& list) {
  json cards = json::array();
  for (const auto& e : list.cards)
    cards.push_back({{"card_id", e.card_id}, {"container", e.container}, {"tabulator", e.tabulator},
                     {"batch", e.batch}, {"position", e.position}});
  return {{"round", round}, {"cards", cards}, {"phantoms", list.phantoms}, {"not_locatable", list.not_locatable}};
}

}  // namespace

ApiServer::ApiServer(StateStore& store, std::string token)
    : store_(store), token_(std::move(token)), http_(std::make_unique<httplib::Server>()) {
  if (token_.empty()) throw InputError("the API needs a nonempty api_token");
  current_ = std::make_shared<const AuditState>(store_.load());
  routes();
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) return http_->bind_to_any_port(host);
  return http_->bind_to_port(host, port) ? port : -1;
}

bool ApiServer::listen() { return http_->listen_after_bind(); }

void ApiServer::stop() {
  if (http_) http_->stop();
}

std::shared_ptr<const AuditState> ApiServer::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return current_;
}

void ApiServer::routes() {
  auto& http = *http_;
  http.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                            {"Access-Control-Allow-Headers", "Authorization, Content-Type"},
                            {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  http.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  auto mutate = [this](const httplib::Request& req, httplib::Response& res,
                       const std::function<json(AuditState&)>& action) {
    if (req.get_header_value("Authorization") != "Bearer " + token_) {
      send_error(res, 401, "missing or invalid bearer token");
      return;
    }
    std::unique_lock lock(write_mutex_, std::try_to_lock);
    if (!lock.owns_lock()) {
      send_error(res, 409, "another mutation is in progress");
      return;
    }
    try {
      AuditState next = *snapshot();
      json body = action(next);
      store_.save(next);
      {
        std::lock_guard guard(snapshot_mutex_);
        current_ = std::make_shared<const AuditState>(std::move(next));
      }
      send_json(res, body);
    } catch (const ApiError& e) {
      send_error(res, e.status, e.message, e.ids);
    } catch (const ParseError& e) {
      send_error(res, 400, e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, e.what());
    } catch (const InputError& e) {
      send_error(res, 422, e.what());
    } catch (const ValidationFailure& e) {
      send_error(res, 422, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  };

  http.Get("/api/state", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, state_summary(*snapshot()));
  });
  http.Get("/api/contests", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, contests_json(*snapshot()));
  });
  http.Get("/api/assertions", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, assertions_json(*snapshot()));
  });
  http.Get("/api/report", [this](const httplib::Request& req, httplib::Response& res) {
    std::optional<double> threshold;
    if (req.has_param("threshold")) {
      try {
        threshold = std::stod(req.get_param_value("threshold"));
      } catch (const std::exception&) {
        send_error(res, 400, "threshold must be a number");
        return;
      }
    }
    res.set_content(report_structured(*snapshot(), threshold), "application/json");
  });
  http.Get(R"(/api/rounds/(\d+)/retrieval-list)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto state = snapshot();
    int round = 0;
    try {
      round = std::stoi(req.matches[1]);
    } catch (const std::exception&) {
      send_error(res, 404, "no such round");
      return;
    }
    if (round < 1 || round > static_cast<int>(state->rounds.size())) {
      send_error(res, 404, "no round " + std::to_string(round));
      return;
    }
    const RetrievalList list = round_retrieval_list(*state, round);
    if (req.get_param_value("format") == "csv") {
      res.set_content(retrieval_list_csv(list), "text/csv");
    } else {
      send_json(res, retrieval_json(round, list));
    }
  });

  http.Post("/api/rounds", [mutate](const httplib::Request& req, httplib::Response& res) {
    mutate(req, res, [&](AuditState& s) {
      if (!req.body.empty()) {
        const json body = json::parse(req.body);
        if (body.contains("seed")) set_seed(s, body.at("seed").get<std::string>());
      }
      return plan_json(next_round(s));
    });
  });
  http.Post("/api/mvrs", [mutate](const httplib::Request& req, httplib::Response& res) {
    mutate(req, res, [&](AuditState& s) {
      CvrParse parsed = parse_mvrs_text(req.body, nullptr, "request");
      if (!parsed.report.rejections.empty()) {
        std::vector<std::string> where;
        for (const auto& r : parsed.report.rejections) where.push_back(r.location + ": " + r.reason);
        throw ApiError{422, "manual records rejected", where};
      }
      if (auto ids = unknown_mvr_ids(s, parsed.records); !ids.empty())
        throw ApiError{422, "unknown card ids", ids};
      if (auto ids = unusable_mvr_ids(s, parsed.records); !ids.empty())
        throw ApiError{422, "cards not selected for audit", ids};
      const ImportResult result = import_mvrs(s, parsed.records, "api");
      if (!s.rounds.empty()) measure(s, false);
      return json{{"accepted", result.accepted}, {"superseded", result.superseded},
                  {"assertions", assertions_json(s)}, {"contests", contests_json(s)}};
    });
  });
  http.Post("/api/measure", [mutate](const httplib::Request& req, httplib::Response& res) {
    mutate(req, res, [&](AuditState& s) {
      measure(s, true);
      return json{{"assertions", assertions_json(s)}, {"contests", contests_json(s)}};
    });
  });
  http.Post(R"(/api/contests/([^/]+)/escalate)", [mutate](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    mutate(req, res, [&](AuditState& s) {
      if (!s.has_contest(id)) throw ApiError{404, "unknown contest " + id, {}};
      escalate(s, id);
      return contests_json(s);
    });
  });
}

}  // namespace rla
