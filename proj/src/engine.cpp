#include "rla/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <unordered_map>

#include "rla/ingest.hpp"

namespace rla {

using json = nlohmann::json;

namespace {

json number_to_json(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double number_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw InputError("bad number in state: " + s);
  }
  return j.get<double>();
}

std::string join(const std::vector<std::string>& items, const std::string& sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

std::unordered_map<std::string, const CardRecord*> index_cards(const AuditState& state) {
  std::unordered_map<std::string, const CardRecord*> out;
  out.reserve(state.cards.size());
  for (const auto& c : state.cards) out.emplace(c.id, &c);
  return out;
}

std::map<std::string, std::string> input_digests(const AuditSpec& spec) {
  std::map<std::string, std::string> out;
  for (const auto& p : spec.cvr_paths) out[p.string()] = sha256_file(p.string());
  out[spec.manifest_path.string()] = sha256_file(spec.manifest_path.string());
  for (const auto& [contest, p] : spec.raire_paths) out[p.string()] = sha256_file(p.string());
  return out;
}

std::vector<CardRecord> cards_from_json_array(const json& j) {
  std::vector<CardRecord> out;
  out.reserve(j.size());
  for (const auto& c : j) out.push_back(card_from_json(c));
  return out;
}

json cards_to_json_array(const std::vector<CardRecord>& cards) {
  json out = json::array();
  for (const auto& c : cards) out.push_back(card_to_json(c));
  return out;
}

std::uint64_t simulation_seed(const std::string& seed, int round, const std::string& assertion_id) {
  const SampleNumber h = hash_sample_number(seed, "sim:" + std::to_string(round) + ":" + assertion_id);
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out = (out << 8) | h.bytes()[i];
  return out;
}

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Assorter values of the contest's cards as reported, with phantoms at zero.
std::vector<std::pair<double, std::int64_t>> polling_distribution(const AuditState& state, const Assertion& a) {
  std::map<double, std::int64_t> counts;
  for (const auto& card : state.cards) {
    const Marks* marks = card.marks(a.contest_id);
    if (!marks) continue;
    ++counts[card.phantom ? 0.0 : assort(a.spec, marks)];
  }
  return {counts.begin(), counts.end()};
}

/// Deterministic interleaving that keeps each value's running share closest to its population share.
DrawSequence polling_sequence(std::vector<std::pair<double, std::int64_t>> dist) {
  std::int64_t total = 0;
  for (const auto& [v, n] : dist) total += n;
  auto taken = std::make_shared<std::vector<std::int64_t>>(dist.size(), 0);
  return [dist = std::move(dist), taken, total](std::int64_t k) {
    std::size_t best = 0;
    double best_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < dist.size(); ++i) {
      const double gap = static_cast<double>(k + 1) * static_cast<double>(dist[i].second) / static_cast<double>(total) -
                         static_cast<double>((*taken)[i]);
      if (gap > best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    ++(*taken)[best];
    return dist[best].first;
  };
}

ErrorModel plug_in_rates(const AuditState& state, const Assertion& a) {
  const std::int64_t draws = a.tracker ? a.tracker->draws : 0;
  auto it = state.overstatements.find(a.id());
  if (draws == 0 || it == state.overstatements.end()) return state.spec.error_model;
  ErrorModel m;
  m.p1 = static_cast<double>(it->second.one_vote) / static_cast<double>(draws);
  m.p2 = static_cast<double>(it->second.two_vote) / static_cast<double>(draws);
  m.placement = state.spec.error_model.placement;
  return m;
}

std::int64_t projected_need(const AuditState& state, const Assertion& a, const Contest& contest, int round,
                            const ErrorModel& errors, double risk_limit) {
  const AlphaState& tracker = *a.tracker;
  const double u = a.spec.upper_bound();
  const std::int64_t remaining = tracker.population - tracker.draws;
  if (p_value(tracker) <= risk_limit) return 0;
  if (contest.mode == AuditMode::comparison && a.margin <= 0.0) return remaining;

  if (state.spec.round_strategy.kind == RoundStrategy::Kind::deterministic_projection) {
    if (contest.mode == AuditMode::comparison)
      return project_draws(tracker, risk_limit, comparison_sequence(a.margin, u, errors));
    return project_draws(tracker, risk_limit, polling_sequence(polling_distribution(state, a)));
  }

  const auto& strategy = state.spec.round_strategy;
  std::mt19937_64 rng(simulation_seed(state.spec.seed, round, a.id()));
  std::vector<std::int64_t> needs;
  needs.reserve(strategy.replications);
  if (contest.mode == AuditMode::comparison) {
    const double clean = overstatement_assorter_value(0.0, a.margin, u);
    const double one = overstatement_assorter_value(u / 2.0, a.margin, u);
    const double two = overstatement_assorter_value(u, a.margin, u);
    for (int r = 0; r < strategy.replications; ++r) {
      needs.push_back(project_draws(tracker, risk_limit, [&](std::int64_t) {
        const double z = unit_draw(rng);
        if (z < errors.p2) return two;
        if (z < errors.p2 + errors.p1) return one;
        return clean;
      }));
    }
  } else {
    const auto dist = polling_distribution(state, a);
    std::vector<double> cumulative;
    double total = 0.0;
    for (const auto& [v, n] : dist) cumulative.push_back(total += static_cast<double>(n));
    for (int r = 0; r < strategy.replications; ++r) {
      needs.push_back(project_draws(tracker, risk_limit, [&](std::int64_t) {
        const double z = unit_draw(rng) * total;
        const auto idx = std::upper_bound(cumulative.begin(), cumulative.end(), z) - cumulative.begin();
        return dist[std::min<std::size_t>(idx, dist.size() - 1)].first;
      }));
    }
  }
  std::sort(needs.begin(), needs.end());
  const auto idx = static_cast<std::size_t>(
      std::max(0.0, std::ceil(strategy.quantile * static_cast<double>(needs.size())) - 1.0));
  return needs[std::min(idx, needs.size() - 1)];
}

std::vector<const Assertion*> open_assertions(const AuditState& state, const std::string& contest_id) {
  std::vector<const Assertion*> out;
  for (const auto& a : state.assertions)
    if (a.contest_id == contest_id && a.status == AssertionStatus::open) out.push_back(&a);
  return out;
}

std::map<std::string, std::int64_t> round_targets(const AuditState& state, int round) {
  std::map<std::string, std::int64_t> targets;
  for (const auto& c : state.contests)
    if (c.status == ContestStatus::active) targets[c.id] = projected_target(state, c, round);
  return targets;
}

/// Records hand-count outcomes for escalated contests whose cards all have manual records.
void settle_hand_counts(AuditState& state) {
  for (const auto& contest : state.contests) {
    if (contest.status != ContestStatus::hand_count) continue;
    std::vector<CardRecord> records;
    bool covered = true;
    for (const auto& card : state.cards) {
      if (card.phantom || !card.contains(contest.id)) continue;
      auto it = state.mvrs.find(card.id);
      if (it == state.mvrs.end()) {
        covered = false;
        break;
      }
      if (!it->second.not_found) records.push_back(it->second);
    }
    if (!covered) continue;
    const Outcome outcome = tabulate(contest, records);
    state.hand_counts[contest.id] = {outcome.winners, outcome.tie, static_cast<std::int64_t>(records.size())};
  }
}

bool hand_count_card(const AuditState& state, const CardRecord& card) {
  for (const auto& [contest, marks] : card.votes)
    if (state.has_contest(contest) && state.contest(contest).status == ContestStatus::hand_count) return true;
  return false;
}

void apply_init(AuditState& state, const json& event) {
  if (!state.log.empty()) throw InputError("audit already initialized");
  const json& config = event.at("config");
  AuditState next;
  next.spec = spec_from_json(config.at("spec"));
  for (const auto& c : config.at("contests")) next.contests.push_back(contest_from_json(c));
  next.input_digests = input_digests(next.spec);
  if (event.contains("inputs")) {
    const auto recorded = event.at("inputs").get<std::map<std::string, std::string>>();
    for (const auto& [path, digest] : recorded) {
      auto it = next.input_digests.find(path);
      if (it == next.input_digests.end() || it->second != digest)
        throw InputError("input file changed since initialization: " + path);
    }
  }
  CvrParse parsed = parse_cvrs(next.spec.cvr_format, next.spec.cvr_paths);
  for (const auto& r : parsed.report.rejections) next.warnings.push_back("CVR rejected at " + r.location + ": " + r.reason);
  for (auto& card : parsed.records) {
    if (card.phantom) throw InputError("CVR input contains phantom record " + card.id);
    card.sample_number.reset();
  }
  next.cards = std::move(parsed.records);
  next.manifest = parse_manifest(next.spec.manifest_path);
  state = std::move(next);
}

void apply_check(AuditState& state) {
  if (state.checked) throw InputError("audit already checked");
  ConsistencyReport report = validate(state.contests, state.cards, state.manifest, state.spec.total_cards_upper_bound);
  state.consistency = report;
  if (report.fatal || !report.winner_mismatches.empty()) return;

  std::vector<Assertion> assertions;
  std::vector<CardRecord> cards = make_phantoms(state.contests, state.cards, report);
  for (const auto& contest : state.contests) {
    std::optional<std::vector<RaireEntry>> raire;
    if (auto it = state.spec.raire_paths.find(contest.id); it != state.spec.raire_paths.end())
      raire = parse_raire(it->second);
    for (auto a : build_assertions(contest, raire)) {
      a = set_margin(std::move(a), cards);
      start_tracking(a, contest.cards_upper_bound, contest.mode, state.spec.risk_function);
      assertions.push_back(std::move(a));
    }
  }
  if (!state.spec.seed.empty()) assign_sample_numbers(state.spec.seed, cards);
  state.cards = std::move(cards);
  state.assertions = std::move(assertions);
  state.checked = true;
  for (const auto& contest : state.contests) {
    ErrorModel none;
    none.p1 = 0.0;
    none.p2 = 0.0;
    state.estimates[contest.id] = {initial_estimate(state, contest, none),
                                   initial_estimate(state, contest, state.spec.error_model)};
  }
}

void apply_seed(AuditState& state, const json& event) {
  const std::string seed = event.at("seed").get<std::string>();
  if (seed.empty()) throw InputError("seed must be nonempty");
  if (!state.spec.seed.empty() && state.spec.seed != seed)
    throw ValidationFailure("seed conflicts with the seed already fixed for this audit");
  if (!state.rounds.empty() && state.spec.seed != seed) throw InputError("seed cannot change after sampling");
  if (state.checked) {
    auto cards = state.cards;
    assign_sample_numbers(seed, cards);
    state.cards = std::move(cards);
  }
  state.spec.seed = seed;
}

void apply_plan_round(AuditState& state, const json& event) {
  if (!state.checked) throw InputError("run check before sampling");
  if (!state.seeded()) throw InputError("no seed: supply one with --seed");
  if (!state.rounds.empty() && state.measured_round < state.rounds.back().round)
    throw InputError("round " + std::to_string(state.rounds.back().round) + " has not been measured");
  std::vector<Contest> active;
  for (const auto& c : state.contests)
    if (c.status == ContestStatus::active) active.push_back(c);
  if (active.empty()) throw InputError("audit complete");

  const int round = static_cast<int>(state.rounds.size()) + 1;
  const auto targets = round_targets(state, round);
  if (event.contains("targets") && event.at("targets").get<std::map<std::string, std::int64_t>>() != targets)
    throw InputError("round targets differ from the recorded plan");
  if (!state.rounds.empty()) {
    bool grows = false;
    for (const auto& [c, t] : targets) {
      auto prev = state.rounds.back().targets.find(c);
      if (prev == state.rounds.back().targets.end() || t > prev->second) grows = true;
    }
    if (!grows) {
      std::vector<std::string> ids;
      for (const auto& c : active) ids.push_back(c.id);
      throw InputError("every card of the active contests has been sampled; escalate " + join(ids));
    }
  }
  const std::set<std::string> prior = state.rounds.empty() ? std::set<std::string>{} : state.rounds.back().selected;
  RoundPlan plan = plan_round(active, targets, state.cards, prior, round);
  plan.selected = consistent_sample(state.cards, plan);
  state.rounds.push_back(std::move(plan));
}

void apply_import(AuditState& state, const json& event) {
  const std::string digest = event.at("digest").get<std::string>();
  const std::string source = event.value("source", std::string("<memory>"));
  const auto records = cards_from_json_array(event.at("records"));
  if (state.imported_digests.count(digest)) throw InputError("manual records already imported: " + source);
  if (auto unknown = unknown_mvr_ids(state, records); !unknown.empty())
    throw InputError("manual records for unknown cards: " + join(unknown));
  std::set<std::string> ids;
  for (const auto& r : records)
    if (!ids.insert(r.id).second) throw InputError("duplicate manual record for card " + r.id);

  const auto selected = state.selected();
  const auto index = index_cards(state);
  for (auto record : records) {
    record.sample_number.reset();
    record.phantom = false;
    const CardRecord* card = index.at(record.id);
    if (!selected.count(record.id) && !hand_count_card(state, *card))
      state.warnings.push_back("manual record for non-selected card " + record.id + " ignored for risk");
    auto [it, inserted] = state.mvrs.insert_or_assign(record.id, std::move(record));
    if (!inserted) state.warnings.push_back("manual record for card " + it->first + " superseded");
  }
  state.imported_digests.insert(digest);
  state.imports_since_measure = true;
  settle_hand_counts(state);
}

void apply_measure(AuditState& state, const json& event) {
  const bool finalize = event.at("finalize").get<bool>();
  if (state.rounds.empty()) throw InputError("no round has been planned");
  const RoundPlan& plan = state.rounds.back();
  if (finalize && state.measured_round == plan.round && !state.imports_since_measure)
    throw InputError("round " + std::to_string(plan.round) + " already measured");

  for (auto& contest : state.contests) {
    if (contest.status != ContestStatus::active) continue;
    auto target = plan.targets.find(contest.id);
    if (target == plan.targets.end()) continue;
    const auto stream = contest_stream(state, contest.id);
    const std::int64_t limit = std::min<std::int64_t>(target->second, static_cast<std::int64_t>(stream.size()));
    for (auto& a : state.assertions) {
      if (a.contest_id != contest.id || a.status != AssertionStatus::open) continue;
      auto& counts = state.overstatements[a.id()];
      const double u = a.spec.upper_bound();
      while (a.tracker->draws < limit) {
        const CardRecord& cvr = state.cards[stream[static_cast<std::size_t>(a.tracker->draws)]];
        const CardRecord* mvr = nullptr;
        if (!cvr.phantom) {
          auto it = state.mvrs.find(cvr.id);
          if (it != state.mvrs.end()) {
            mvr = &it->second;
          } else if (!finalize) {
            break;
          }
        }
        bool style = false;
        const double x = observed_value(a, {&cvr, mvr}, &style);
        if (style) ++counts.style_discrepancies;
        if (contest.mode == AuditMode::comparison) {
          const double omega = overstatement(a, cvr, mvr).value;
          const double tol = 1e-12 * u;
          if (omega >= u - tol) {
            ++counts.two_vote;
          } else if (omega > tol) {
            ++counts.one_vote;
          } else if (omega < -tol) {
            ++counts.understatements;
          }
        }
        a.tracker = alpha_step(*a.tracker, x);
        if (p_value(*a.tracker) <= contest.risk_limit) {
          a.status = AssertionStatus::confirmed;
          break;
        }
      }
    }
    if (open_assertions(state, contest.id).empty()) contest.status = ContestStatus::confirmed;
  }
  if (finalize) {
    state.measured_round = plan.round;
    state.imports_since_measure = false;
  }
}

void apply_escalate(AuditState& state, const json& event) {
  const std::string id = event.at("contest").get<std::string>();
  if (!state.has_contest(id)) throw InputError("unknown contest " + id);
  Contest& contest = state.contest(id);
  if (contest.status != ContestStatus::active)
    throw InputError("contest " + id + " is " + to_string(contest.status) + ", not active");
  contest.status = ContestStatus::hand_count;
  for (auto& a : state.assertions)
    if (a.contest_id == id && a.status == AssertionStatus::open) a.status = AssertionStatus::hand_counted;
  settle_hand_counts(state);
}

}  // namespace

const Contest& AuditState::contest(const std::string& id) const {
  for (const auto& c : contests)
    if (c.id == id) return c;
  throw InputError("unknown contest " + id);
}

Contest& AuditState::contest(const std::string& id) {
  for (auto& c : contests)
    if (c.id == id) return c;
  throw InputError("unknown contest " + id);
}

bool AuditState::has_contest(const std::string& id) const {
  return std::any_of(contests.begin(), contests.end(), [&](const Contest& c) { return c.id == id; });
}

std::vector<const Assertion*> AuditState::assertions_for(const std::string& contest_id) const {
  std::vector<const Assertion*> out;
  for (const auto& a : assertions)
    if (a.contest_id == contest_id) out.push_back(&a);
  return out;
}

const CardRecord* AuditState::card(const std::string& id) const {
  for (const auto& c : cards)
    if (c.id == id) return &c;
  return nullptr;
}

std::set<std::string> AuditState::selected() const { return rounds.empty() ? std::set<std::string>{} : rounds.back().selected; }

bool AuditState::seeded() const { return !spec.seed.empty(); }

void apply_event(AuditState& state, const json& event) {
  const std::string type = event.at("type").get<std::string>();
  if (type != "init" && state.log.empty()) throw InputError("audit not initialized");
  if (type == "init") {
    apply_init(state, event);
  } else if (type == "check") {
    apply_check(state);
  } else if (type == "seed") {
    apply_seed(state, event);
  } else if (type == "plan_round") {
    apply_plan_round(state, event);
  } else if (type == "import_mvrs") {
    apply_import(state, event);
  } else if (type == "measure") {
    apply_measure(state, event);
  } else if (type == "escalate") {
    apply_escalate(state, event);
  } else {
    throw InputError("unknown event type " + type);
  }
  state.log.push_back(event);
}

AuditState replay(const std::vector<json>& events) {
  AuditState state;
  for (const auto& e : events) apply_event(state, e);
  return state;
}

AuditState initialize(const AuditConfig& config) {
  json contests = json::array();
  for (const auto& c : config.contests) contests.push_back(to_json(c));
  json event = {{"type", "init"}, {"config", {{"spec", to_json(config.spec)}, {"contests", contests}}}};
  event["inputs"] = input_digests(config.spec);
  AuditState state;
  apply_event(state, event);
  return state;
}

ConsistencyReport check(AuditState& state) {
  if (!state.checked) apply_event(state, {{"type", "check"}});
  const ConsistencyReport& report = state.consistency;
  if (report.fatal) {
    std::vector<std::string> parts;
    for (const auto& o : report.overfull_contests)
      parts.push_back(o.contest_id + " has " + std::to_string(o.cvr_count) + " CVRs but at most " +
                      std::to_string(o.upper_bound) + " cards");
    throw FatalInconsistency("overfull contest: " + join(parts, "; "));
  }
  if (!report.winner_mismatches.empty())
    throw ValidationFailure("reported winners contradicted by the CVRs: " + join(report.winner_mismatches));
  return report;
}

void set_seed(AuditState& state, const std::string& seed) {
  if (state.spec.seed == seed && !seed.empty()) return;
  apply_event(state, {{"type", "seed"}, {"seed", seed}});
}

const RoundPlan& next_round(AuditState& state) {
  if (!state.checked) throw InputError("run check before sampling");
  const int round = static_cast<int>(state.rounds.size()) + 1;
  json event = {{"type", "plan_round"}, {"round", round}};
  if (state.checked && state.seeded()) event["targets"] = round_targets(state, round);
  apply_event(state, event);
  return state.rounds.back();
}

std::vector<std::string> unknown_mvr_ids(const AuditState& state, const std::vector<CardRecord>& records) {
  const auto index = index_cards(state);
  std::vector<std::string> out;
  for (const auto& r : records) {
    auto it = index.find(r.id);
    if (it == index.end() || it->second->phantom) out.push_back(r.id);
  }
  return out;
}

std::vector<std::string> unusable_mvr_ids(const AuditState& state, const std::vector<CardRecord>& records) {
  const auto selected = state.selected();
  const auto index = index_cards(state);
  std::vector<std::string> out;
  for (const auto& r : records) {
    auto it = index.find(r.id);
    const CardRecord* card = it == index.end() ? nullptr : it->second;
    if (card && !card->phantom && !selected.count(r.id) && !hand_count_card(state, *card)) out.push_back(r.id);
  }
  return out;
}

ImportResult import_mvrs(AuditState& state, const std::vector<CardRecord>& records, const std::string& source) {
  ImportResult result;
  const auto selected = state.selected();
  const auto index = index_cards(state);
  for (const auto& r : records) {
    if (state.mvrs.count(r.id)) result.superseded.push_back(r.id);
    auto it = index.find(r.id);
    const CardRecord* card = it == index.end() ? nullptr : it->second;
    if (card && !selected.count(r.id) && !hand_count_card(state, *card)) result.not_selected.push_back(r.id);
  }
  apply_event(state, {{"type", "import_mvrs"},
                 {"source", source},
                 {"digest", sha256_hex(serialize_canonical(records))},
                 {"records", cards_to_json_array(records)}});
  result.accepted = static_cast<std::int64_t>(records.size());
  return result;
}

void measure(AuditState& state, bool finalize) { apply_event(state, {{"type", "measure"}, {"finalize", finalize}}); }

ImportResult run_round(AuditState& state, const std::vector<CardRecord>& records, const std::string& source) {
  ImportResult result = import_mvrs(state, records, source);
  measure(state, true);
  return result;
}

void escalate(AuditState& state, const std::string& contest_id) {
  apply_event(state, {{"type", "escalate"}, {"contest", contest_id}});
}

std::int64_t projected_target(const AuditState& state, const Contest& contest, int round) {
  std::int64_t prev = 0;
  if (!state.rounds.empty()) {
    auto it = state.rounds.back().targets.find(contest.id);
    if (it != state.rounds.back().targets.end()) prev = it->second;
  }
  const auto open = open_assertions(state, contest.id);
  if (open.empty()) return prev;
  std::int64_t consumed = 0;
  std::int64_t need = 0;
  for (const Assertion* a : open) {
    consumed = std::max(consumed, a->tracker->draws);
    need = std::max(need, projected_need(state, *a, contest, round, plug_in_rates(state, *a), contest.risk_limit));
  }
  const double padded = std::ceil(state.spec.inflation_factor * static_cast<double>(need));
  const std::int64_t target =
      padded >= static_cast<double>(contest.cards_upper_bound)
          ? contest.cards_upper_bound
          : std::min(contest.cards_upper_bound, consumed + static_cast<std::int64_t>(padded));
  return std::max(target, prev);
}

std::int64_t initial_estimate(const AuditState& state, const Contest& contest, const ErrorModel& errors,
                              std::optional<double> risk_limit) {
  const double alpha = risk_limit.value_or(contest.risk_limit);
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("risk limit must lie in (0, 1)");
  errors.validate();
  std::int64_t need = 0;
  for (const Assertion* a : state.assertions_for(contest.id)) {
    Assertion fresh = *a;
    start_tracking(fresh, contest.cards_upper_bound, contest.mode, state.spec.risk_function);
    need = std::max(need, projected_need(state, fresh, contest, 0, errors, alpha));
  }
  return std::min(need, contest.cards_upper_bound);
}

RetrievalList round_retrieval_list(const AuditState& state, int round) {
  if (round < 1 || round > static_cast<int>(state.rounds.size()))
    throw InputError("no round " + std::to_string(round));
  std::set<std::string> fresh = state.rounds[round - 1].selected;
  if (round > 1)
    for (const auto& id : state.rounds[round - 2].selected) fresh.erase(id);
  return retrieval_list(fresh, state.cards, state.manifest);
}

std::vector<std::size_t> contest_stream(const AuditState& state, const std::string& contest_id) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < state.cards.size(); ++i) {
    if (!state.cards[i].contains(contest_id)) continue;
    if (!state.cards[i].sample_number) throw InputError("cards have no sample numbers yet");
    out.push_back(i);
  }
  std::sort(out.begin(), out.end(),
            [&](std::size_t a, std::size_t b) { return *state.cards[a].sample_number < *state.cards[b].sample_number; });
  return out;
}

double estimated_workload(const AuditState& state, const std::map<std::string, std::int64_t>& targets) {
  std::map<std::string, double> fractions;
  for (const auto& [id, s] : targets)
    fractions[id] = static_cast<double>(s) / static_cast<double>(state.contest(id).cards_upper_bound);
  double total = 0.0;
  for (const auto& card : state.cards) {
    if (card.phantom) continue;
    double p = 0.0;
    for (const auto& [contest, marks] : card.votes) {
      auto it = fractions.find(contest);
      if (it != fractions.end()) p = std::max(p, it->second);
    }
    total += p;
  }
  return total;
}

json card_to_json(const CardRecord& card) {
  json contests = json::object();
  for (const auto& [contest, marks] : card.votes) contests[contest] = marks;
  json j = {{"id", card.id}, {"contests", contests}};
  if (card.phantom) j["phantom"] = true;
  if (card.not_found) j["not_found"] = true;
  if (card.sample_number) j["sample_number"] = card.sample_number->to_hex();
  return j;
}

CardRecord card_from_json(const json& j) {
  CardRecord card;
  card.id = j.at("id").get<std::string>();
  for (const auto& [contest, marks] : j.at("contests").items()) card.votes[contest] = marks.get<Marks>();
  card.phantom = j.value("phantom", false);
  card.not_found = j.value("not_found", false);
  if (auto it = j.find("sample_number"); it != j.end()) card.sample_number = SampleNumber::from_hex(it->get<std::string>());
  return card;
}

json round_to_json(const RoundPlan& plan) {
  json thresholds = json::object();
  for (const auto& [c, t] : plan.thresholds) thresholds[c] = t.to_hex();
  return {{"round", plan.round},
          {"targets", plan.targets},
          {"fractions", plan.fractions},
          {"thresholds", thresholds},
          {"selected", plan.selected},
          {"estimated_total", plan.estimated_total}};
}

RoundPlan round_from_json(const json& j) {
  RoundPlan plan;
  plan.round = j.at("round").get<int>();
  plan.targets = j.at("targets").get<std::map<std::string, std::int64_t>>();
  plan.fractions = j.at("fractions").get<std::map<std::string, double>>();
  for (const auto& [c, t] : j.at("thresholds").items()) plan.thresholds[c] = SampleNumber::from_hex(t.get<std::string>());
  plan.selected = j.at("selected").get<std::set<std::string>>();
  plan.estimated_total = j.at("estimated_total").get<double>();
  return plan;
}

namespace {

json spec_to_json(const AssorterSpec& s) {
  json j = {{"kind", static_cast<int>(s.kind)}, {"winner", s.winner}, {"loser", s.loser},
            {"allowed_marks", s.allowed_marks}, {"fraction", s.fraction}, {"continuing", s.continuing}};
  return j;
}

AssorterSpec assorter_from_json(const json& j) {
  AssorterSpec s;
  s.kind = static_cast<AssorterSpec::Kind>(j.at("kind").get<int>());
  s.winner = j.at("winner").get<std::string>();
  s.loser = j.at("loser").get<std::string>();
  s.allowed_marks = j.at("allowed_marks").get<int>();
  s.fraction = j.at("fraction").get<double>();
  s.continuing = j.at("continuing").get<std::vector<std::string>>();
  return s;
}

json tracker_to_json(const AlphaState& t) {
  return {{"population", t.population},       {"upper", t.upper},
          {"eta", t.eta},                     {"mode", to_string(t.mode)},
          {"draws", t.draws},                 {"running_sum", t.running_sum},
          {"martingale", number_to_json(t.martingale)}, {"martingale_max", number_to_json(t.martingale_max)}};
}

AlphaState tracker_from_json(const json& j) {
  AlphaState t;
  t.population = j.at("population").get<std::int64_t>();
  t.upper = j.at("upper").get<double>();
  t.eta = j.at("eta").get<double>();
  t.mode = audit_mode_from_string(j.at("mode").get<std::string>());
  t.draws = j.at("draws").get<std::int64_t>();
  t.running_sum = j.at("running_sum").get<double>();
  t.martingale = number_from_json(j.at("martingale"));
  t.martingale_max = number_from_json(j.at("martingale_max"));
  return t;
}

json assertion_to_json(const Assertion& a) {
  json j = {{"contest_id", a.contest_id},
            {"spec", spec_to_json(a.spec)},
            {"reported_mean", a.reported_mean},
            {"margin", a.margin},
            {"overstatement_bound", a.overstatement_bound},
            {"reported_loser_ahead", a.reported_loser_ahead},
            {"status", to_string(a.status)}};
  if (a.tracker) j["tracker"] = tracker_to_json(*a.tracker);
  return j;
}

Assertion assertion_from_json(const json& j) {
  Assertion a;
  a.contest_id = j.at("contest_id").get<std::string>();
  a.spec = assorter_from_json(j.at("spec"));
  a.reported_mean = j.at("reported_mean").get<double>();
  a.margin = j.at("margin").get<double>();
  a.overstatement_bound = j.at("overstatement_bound").get<double>();
  a.reported_loser_ahead = j.at("reported_loser_ahead").get<bool>();
  a.status = assertion_status_from_string(j.at("status").get<std::string>());
  if (auto it = j.find("tracker"); it != j.end()) a.tracker = tracker_from_json(*it);
  return a;
}

json consistency_to_json(const ConsistencyReport& r) {
  json overfull = json::array();
  for (const auto& o : r.overfull_contests)
    overfull.push_back({{"contest", o.contest_id}, {"cvr_count", o.cvr_count}, {"upper_bound", o.upper_bound}});
  return {{"winner_mismatches", r.winner_mismatches}, {"tied_contests", r.tied_contests},
          {"overfull_contests", overfull},           {"phantom_cvrs_needed", r.phantom_cvrs_needed},
          {"phantom_cards_needed", r.phantom_cards_needed}, {"fatal", r.fatal}};
}

ConsistencyReport consistency_from_json(const json& j) {
  ConsistencyReport r;
  r.winner_mismatches = j.at("winner_mismatches").get<std::vector<std::string>>();
  r.tied_contests = j.at("tied_contests").get<std::vector<std::string>>();
  for (const auto& o : j.at("overfull_contests"))
    r.overfull_contests.push_back(
        {o.at("contest").get<std::string>(), o.at("cvr_count").get<std::int64_t>(), o.at("upper_bound").get<std::int64_t>()});
  r.phantom_cvrs_needed = j.at("phantom_cvrs_needed").get<std::map<std::string, std::int64_t>>();
  r.phantom_cards_needed = j.at("phantom_cards_needed").get<std::int64_t>();
  r.fatal = j.at("fatal").get<bool>();
  return r;
}

json manifest_to_json(const BallotManifest& m) {
  json entries = json::array();
  for (const auto& e : m.entries)
    entries.push_back({{"container", e.container}, {"tabulator", e.tabulator}, {"batch", e.batch},
                       {"card_count", e.card_count}, {"id_prefix", e.id_prefix}});
  return {{"entries", entries}, {"total_cards", m.total_cards}};
}

BallotManifest manifest_from_json(const json& j) {
  BallotManifest m;
  for (const auto& e : j.at("entries"))
    m.entries.push_back({e.at("container").get<std::string>(), e.at("tabulator").get<std::string>(),
                         e.at("batch").get<std::string>(), e.at("card_count").get<std::int64_t>(),
                         e.at("id_prefix").get<std::string>()});
  m.total_cards = j.at("total_cards").get<std::int64_t>();
  return m;
}

}  // namespace

json state_to_json(const AuditState& state) {
  json contests = json::array();
  for (const auto& c : state.contests) contests.push_back(to_json(c));
  json assertions = json::array();
  for (const auto& a : state.assertions) assertions.push_back(assertion_to_json(a));
  json estimates = json::object();
  for (const auto& [c, e] : state.estimates) estimates[c] = {{"zero_error", e.zero_error}, {"with_errors", e.with_errors}};
  json rounds = json::array();
  for (const auto& r : state.rounds) rounds.push_back(round_to_json(r));
  json mvrs = json::array();
  for (const auto& [id, r] : state.mvrs) mvrs.push_back(card_to_json(r));
  json over = json::object();
  for (const auto& [id, o] : state.overstatements)
    over[id] = {{"one_vote", o.one_vote}, {"two_vote", o.two_vote}, {"understatements", o.understatements},
                {"style_discrepancies", o.style_discrepancies}};
  json hand = json::object();
  for (const auto& [id, h] : state.hand_counts)
    hand[id] = {{"winners", h.winners}, {"tie", h.tie}, {"cards_counted", h.cards_counted}};
  return {{"spec", to_json(state.spec)},
          {"contests", contests},
          {"assertions", assertions},
          {"manifest", manifest_to_json(state.manifest)},
          {"input_digests", state.input_digests},
          {"checked", state.checked},
          {"consistency", consistency_to_json(state.consistency)},
          {"estimates", estimates},
          {"rounds", rounds},
          {"mvrs", mvrs},
          {"overstatements", over},
          {"hand_counts", hand},
          {"imported_digests", state.imported_digests},
          {"measured_round", state.measured_round},
          {"imports_since_measure", state.imports_since_measure},
          {"warnings", state.warnings},
          {"events", state.log.size()}};
}

AuditState state_from_json(const json& j, std::vector<CardRecord> cards) {
  AuditState s;
  s.spec = spec_from_json(j.at("spec"));
  for (const auto& c : j.at("contests")) s.contests.push_back(contest_from_json(c));
  for (const auto& a : j.at("assertions")) s.assertions.push_back(assertion_from_json(a));
  s.cards = std::move(cards);
  s.manifest = manifest_from_json(j.at("manifest"));
  s.input_digests = j.at("input_digests").get<std::map<std::string, std::string>>();
  s.checked = j.at("checked").get<bool>();
  s.consistency = consistency_from_json(j.at("consistency"));
  for (const auto& [c, e] : j.at("estimates").items())
    s.estimates[c] = {e.at("zero_error").get<std::int64_t>(), e.at("with_errors").get<std::int64_t>()};
  for (const auto& r : j.at("rounds")) s.rounds.push_back(round_from_json(r));
  for (const auto& m : j.at("mvrs")) {
    CardRecord r = card_from_json(m);
    s.mvrs[r.id] = std::move(r);
  }
  for (const auto& [id, o] : j.at("overstatements").items())
    s.overstatements[id] = {o.at("one_vote").get<std::int64_t>(), o.at("two_vote").get<std::int64_t>(),
                            o.at("understatements").get<std::int64_t>(), o.at("style_discrepancies").get<std::int64_t>()};
  for (const auto& [id, h] : j.at("hand_counts").items())
    s.hand_counts[id] = {h.at("winners").get<std::vector<std::string>>(), h.at("tie").get<bool>(),
                         h.at("cards_counted").get<std::int64_t>()};
  s.imported_digests = j.at("imported_digests").get<std::set<std::string>>();
  s.measured_round = j.at("measured_round").get<int>();
  s.imports_since_measure = j.at("imports_since_measure").get<bool>();
  s.warnings = j.at("warnings").get<std::vector<std::string>>();
  return s;
}

}  // namespace rla
