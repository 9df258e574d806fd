#include "rla/cli.hpp"

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rla/config.hpp"
#include "rla/engine.hpp"
#include "rla/ingest.hpp"
#include "rla/report.hpp"
#include "rla/server.hpp"
#include "rla/state_store.hpp"

namespace rla {

using json = nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::string state_dir = "audit-state";
  std::string seed;
  int round = 0;
  std::optional<double> errors;
  std::optional<double> risk_limit;
  std::optional<double> threshold;
  std::string format = "table";
  std::string mvr_file;
  std::string contest;
  std::string host = "127.0.0.1";
  int port = 8080;
};

std::string fmt(const char* spec, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

void print_warnings(const AuditState& state, std::size_t from, std::ostream& err) {
  for (std::size_t i = from; i < state.warnings.size(); ++i) err << "warning: " << state.warnings[i] << '\n';
}

int cmd_init(const Options& o, std::ostream& out) {
  if (o.config.empty()) throw InputError("init requires --config");
  const AuditConfig config = load_config(o.config);
  StateStore store(o.state_dir);
  if (store.exists()) {
    const AuditState existing = store.load();
    json contests = json::array();
    for (const auto& c : config.contests) contests.push_back(to_json(c));
    const json wanted = {{"spec", to_json(config.spec)}, {"contests", contests}};
    if (existing.log.empty() || existing.log.front().at("config") != wanted)
      throw InputError("state directory " + o.state_dir + " already holds a different audit");
    out << "audit already initialized in " << o.state_dir << '\n';
    return 0;
  }
  AuditState state = initialize(config);
  store.save(state);
  out << "initialized audit: " << state.contests.size() << " contests, " << state.cards.size() << " CVRs, "
      << state.manifest.total_cards << " manifest cards\n";
  return 0;
}

int cmd_check(const Options& o, std::ostream& out, std::ostream& err) {
  StateStore store(o.state_dir);
  AuditState state = store.load();
  const std::size_t warned = state.warnings.size();
  try {
    check(state);
  } catch (...) {
    store.save(state);
    throw;
  }
  store.save(state);
  print_warnings(state, warned, err);
  const auto& r = state.consistency;
  out << "consistency checks passed\n";
  out << "phantom cards added: " << r.phantom_cards_needed << '\n';
  for (const auto& [c, n] : r.phantom_cvrs_needed)
    if (n > 0) out << "  " << c << ": " << n << " phantom CVRs\n";
  for (const auto& c : r.tied_contests) out << "tied contest: " << c << " (requires a full hand count)\n";
  out << state.assertions.size() << " assertions\n";
  return 0;
}

int cmd_estimate(const Options& o, std::ostream& out) {
  StateStore store(o.state_dir);
  const AuditState state = store.load();
  if (!state.checked) throw InputError("run check before estimate");
  ErrorModel none;
  ErrorModel injected = state.spec.error_model;
  if (o.errors) {
    injected = ErrorModel{};
    injected.p1 = *o.errors;
  }
  std::ostringstream csv;
  csv << "contest,cards_upper_bound,diluted_margin,risk_limit,estimate_no_errors,estimate_with_errors,p1,p2\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %10s %10s %8s %12s %12s\n", "contest", "N_c", "margin", "alpha", "no_errors",
                "with_errors");
  out << line;
  std::map<std::string, std::int64_t> targets;
  for (const auto& c : state.contests) {
    const double alpha = o.risk_limit.value_or(c.risk_limit);
    const std::int64_t clean = initial_estimate(state, c, none, alpha);
    const std::int64_t dirty = initial_estimate(state, c, injected, alpha);
    targets[c.id] = dirty;
    const double margin = contest_margin(state, c.id);
    std::snprintf(line, sizeof line, "%-16s %10lld %10s %8s %12lld %12lld\n", c.id.c_str(),
                  static_cast<long long>(c.cards_upper_bound), fmt("%.5f", margin).c_str(), fmt("%g", alpha).c_str(),
                  static_cast<long long>(clean), static_cast<long long>(dirty));
    out << line;
    csv << c.id << ',' << c.cards_upper_bound << ',' << fmt("%.10g", margin) << ',' << fmt("%g", alpha) << ','
        << clean << ',' << dirty << ',' << fmt("%g", injected.p1) << ',' << fmt("%g", injected.p2) << '\n';
  }
  out << "expected cards to retrieve: " << fmt("%.1f", estimated_workload(state, targets)) << '\n';
  const auto path = store.dir() / "estimate.csv";
  write_file_atomic(path, csv.str());
  out << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_sample(const Options& o, std::ostream& out) {
  StateStore store(o.state_dir);
  AuditState state = store.load();
  if (!o.seed.empty()) set_seed(state, o.seed);
  const int planned = static_cast<int>(state.rounds.size());
  int round = o.round;
  if (round == 0) round = planned + 1;
  if (round == planned + 1) {
    next_round(state);
  } else if (round < 1 || round > planned) {
    throw InputError("round " + std::to_string(round) + " cannot be sampled; " + std::to_string(planned) +
                     " rounds planned");
  }
  store.save(state);
  const RoundPlan& plan = state.rounds[round - 1];
  const RetrievalList list = round_retrieval_list(state, round);
  const auto path = store.dir() / ("round-" + std::to_string(round) + "-retrieval.csv");
  write_file_atomic(path, retrieval_list_csv(list));
  out << "round " << round << ": " << list.cards.size() << " cards to retrieve, " << list.phantoms.size()
      << " phantoms, " << list.not_locatable.size() << " not locatable\n";
  for (const auto& [c, s] : plan.targets) out << "  " << c << ": cumulative sample " << s << '\n';
  out << "expected cards: " << fmt("%.1f", plan.estimated_total) << '\n';
  out << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_import(const Options& o, std::ostream& out, std::ostream& err) {
  StateStore store(o.state_dir);
  AuditState state = store.load();
  std::set<std::string> known;
  for (const auto& c : state.cards)
    if (!c.phantom) known.insert(c.id);
  CvrParse parsed = parse_mvrs(o.mvr_file, &known);
  if (!parsed.report.rejections.empty()) {
    for (const auto& r : parsed.report.rejections) err << r.location << ": " << r.reason << '\n';
    throw InputError(std::to_string(parsed.report.rejections.size()) + " manual records rejected; nothing imported");
  }
  const std::size_t warned = state.warnings.size();
  const ImportResult result = import_mvrs(state, parsed.records, std::filesystem::path(o.mvr_file).filename().string());
  store.save(state);
  print_warnings(state, warned, err);
  out << "imported " << result.accepted << " manual records";
  if (!result.not_selected.empty()) out << " (" << result.not_selected.size() << " for cards not selected)";
  out << '\n';
  return 0;
}

int cmd_measure(const Options& o, std::ostream& out) {
  StateStore store(o.state_dir);
  AuditState state = store.load();
  measure(state, true);
  store.save(state);
  for (const auto& c : state.contests) {
    out << c.id << ": " << to_string(c.status) << '\n';
    for (const Assertion* a : state.assertions_for(c.id))
      out << "  " << a->id() << "  p=" << fmt("%.6g", a->tracker ? p_value(*a->tracker) : 1.0)
          << "  draws=" << (a->tracker ? a->tracker->draws : 0) << '\n';
  }
  bool active = false;
  for (const auto& c : state.contests) active = active || c.status == ContestStatus::active;
  out << (active ? "audit continues: plan another round or escalate\n" : "audit complete\n");
  return 0;
}

int cmd_escalate(const Options& o, std::ostream& out) {
  StateStore store(o.state_dir);
  AuditState state = store.load();
  const Contest& contest = state.contest(o.contest);
  std::int64_t sampled = 0;
  for (const Assertion* a : state.assertions_for(contest.id))
    if (a->tracker) sampled = std::max(sampled, a->tracker->draws);
  escalate(state, o.contest);
  store.save(state);
  out << o.contest << ": full hand count of " << contest.cards_upper_bound << " cards (" << sampled
      << " already sampled)\n";
  if (state.hand_counts.count(o.contest)) out << o.contest << ": every card already has a manual record\n";
  return 0;
}

int cmd_report(const Options& o, std::ostream& out) {
  StateStore store(o.state_dir);
  const AuditState state = store.load();
  if (o.format == "structured") {
    out << report_structured(state, o.threshold);
  } else if (o.format == "csv") {
    out << report_csv(state, o.threshold);
  } else {
    out << report_table(state, o.threshold);
  }
  return 0;
}

ApiServer* running_server = nullptr;

void handle_signal(int) {
  if (running_server) running_server->stop();
}

int cmd_serve(const Options& o, std::ostream& out) {
  StateStore store(o.state_dir);
  const std::string token = store.load().spec.api_token;
  ApiServer server(store, token);
  const int port = server.bind(o.host, o.port);
  if (port < 0) throw std::runtime_error("cannot bind " + o.host + ":" + std::to_string(o.port));
  out << "serving on http://" << o.host << ':' << port << std::endl;
  running_server = &server;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  server.listen();
  running_server = nullptr;
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Risk-limiting audit engine with card-style data"};
  app.require_subcommand(1);
  app.add_option("--config", o.config, "Audit configuration file");
  app.add_option("--state-dir", o.state_dir, "Audit state directory")->envname("RLA_STATE_DIR");

  auto* init = app.add_subcommand("init", "Create the audit state from a configuration");
  auto* check_cmd = app.add_subcommand("check", "Consistency checks, phantoms, assertions and margins");
  auto* estimate = app.add_subcommand("estimate", "Initial sample sizes per contest");
  estimate->add_option("--errors", o.errors, "Injected one-vote overstatement rate")->check(CLI::Range(0.0, 1.0));
  estimate->add_option("--risk-limit", o.risk_limit, "Risk limit override")->check(CLI::Range(0.0, 1.0));
  auto* sample = app.add_subcommand("sample", "Plan a round and write its retrieval list");
  sample->add_option("--round", o.round, "Round number")->check(CLI::PositiveNumber);
  sample->add_option("--seed", o.seed, "Seed from the public ceremony");
  auto* import = app.add_subcommand("import-mvrs", "Import manual vote records");
  import->add_option("file", o.mvr_file, "Manual records file")->required()->check(CLI::ExistingFile);
  auto* measure_cmd = app.add_subcommand("measure", "Update measured risk for the current round");
  auto* escalate_cmd = app.add_subcommand("escalate", "Send a contest to a full hand count");
  escalate_cmd->add_option("contest", o.contest, "Contest id")->required();
  auto* report = app.add_subcommand("report", "Audit report");
  report->add_option("--threshold", o.threshold, "Recount margin threshold")->check(CLI::Range(0.0, 1.0));
  report->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"table", "csv", "structured"}));
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  serve->add_option("--host", o.host, "Listen address");
  serve->add_option("--port", o.port, "Listen port")->check(CLI::Range(0, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n' << app.help();
    return 1;
  }

  try {
    if (*init) return cmd_init(o, out);
    if (*check_cmd) return cmd_check(o, out, err);
    if (*estimate) return cmd_estimate(o, out);
    if (*sample) return cmd_sample(o, out);
    if (*import) return cmd_import(o, out, err);
    if (*measure_cmd) return cmd_measure(o, out);
    if (*escalate_cmd) return cmd_escalate(o, out);
    if (*report) return cmd_report(o, out);
    if (*serve) return cmd_serve(o, out);
  } catch (const FatalInconsistency& e) {
    err << "fatal: " << e.what() << '\n';
    return 3;
  } catch (const ValidationFailure& e) {
    err << "validation failed: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace rla
