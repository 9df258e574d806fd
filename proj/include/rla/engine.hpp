#pragma once

// The audit loop. Every mutation is expressed as an event; applying the
// event to a state is the only way state changes, so replaying the event log
// from an empty state reproduces the audit exactly.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "rla/assertions.hpp"
#include "rla/config.hpp"
#include "rla/model.hpp"
#include "rla/sampling.hpp"

namespace rla {

/// Raised when the consistency checks find a contest with more CVRs than its
/// card bound. No audit can proceed.
class FatalInconsistency : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for reported outcomes the CVRs contradict.
class ValidationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-assertion tallies of observed overstatements.
struct OverstatementCounts {
  std::int64_t one_vote = 0;
  std::int64_t two_vote = 0;
  std::int64_t understatements = 0;
  std::int64_t style_discrepancies = 0;
};

struct ContestEstimate {
  std::int64_t zero_error = 0;
  /// With the configured injected error model.
  std::int64_t with_errors = 0;
};

struct HandCountResult {
  std::vector<std::string> winners;
  bool tie = false;
  std::int64_t cards_counted = 0;
};

struct AuditState {
  AuditSpec spec;
  std::vector<Contest> contests;
  std::vector<Assertion> assertions;
  /// CVRs followed by phantoms, with sample numbers once the seed is known.
  std::vector<CardRecord> cards;
  BallotManifest manifest;
  std::map<std::string, std::string> input_digests;
  bool checked = false;
  ConsistencyReport consistency;
  std::map<std::string, ContestEstimate> estimates;
  std::vector<RoundPlan> rounds;
  std::map<std::string, CardRecord> mvrs;
  std::map<std::string, OverstatementCounts> overstatements;
  std::map<std::string, HandCountResult> hand_counts;
  std::set<std::string> imported_digests;
  int measured_round = 0;
  bool imports_since_measure = false;
  std::vector<std::string> warnings;
  std::vector<nlohmann::json> log;

  const Contest& contest(const std::string& id) const;
  Contest& contest(const std::string& id);
  bool has_contest(const std::string& id) const;
  std::vector<const Assertion*> assertions_for(const std::string& contest_id) const;
  const CardRecord* card(const std::string& id) const;
  std::set<std::string> selected() const;
  bool seeded() const;
};

/// Applies one event. Invalid events are refused before any change is made.
void apply_event(AuditState& state, const nlohmann::json& event);

/// Rebuilds a state from its event log.
AuditState replay(const std::vector<nlohmann::json>& events);

// Operations. Each validates, records an event and applies it.

AuditState initialize(const AuditConfig& config);

/// Consistency checks, phantoms, assertions, margins and initial estimates.
/// Throws FatalInconsistency for an overfull contest and ValidationFailure for
/// a winner mismatch; the report is kept in the state either way.
ConsistencyReport check(AuditState& state);

/// Fixes the seed and assigns sample numbers.
void set_seed(AuditState& state, const std::string& seed);

/// Plans the next round for the active contests.
const RoundPlan& next_round(AuditState& state);

struct ImportResult {
  std::int64_t accepted = 0;
  std::vector<std::string> not_selected;  ///< accepted but not used for risk
  std::vector<std::string> superseded;
};

/// Stores manual records. Unknown card ids are refused (InputError listing
/// them); a source digest seen before is refused.
ImportResult import_mvrs(AuditState& state, const std::vector<CardRecord>& records, const std::string& source);

/// Checks what import_mvrs would refuse, without changing state.
std::vector<std::string> unknown_mvr_ids(const AuditState& state, const std::vector<CardRecord>& records);
std::vector<std::string> unusable_mvr_ids(const AuditState& state, const std::vector<CardRecord>& records);

/// Advances risk measurement through the current round's sample. With
/// `finalize`, selected cards lacking a manual record count as not found;
/// otherwise measurement pauses at the first missing record.
void measure(AuditState& state, bool finalize);

/// import_mvrs followed by a finalizing measure.
ImportResult run_round(AuditState& state, const std::vector<CardRecord>& records, const std::string& source);

/// Sends an active contest to a full hand count.
void escalate(AuditState& state, const std::string& contest_id);

/// Cumulative sample size S_c for the contest in the given round: draws
/// consumed so far plus the largest projected need among its open assertions,
/// scaled by the inflation factor and capped at N_c.
std::int64_t projected_target(const AuditState& state, const Contest& contest, int round);

/// Initial sample size for a contest (largest over its assertions) under an
/// injected error model; `risk_limit` overrides the contest's.
std::int64_t initial_estimate(const AuditState& state, const Contest& contest, const ErrorModel& errors,
                              std::optional<double> risk_limit = std::nullopt);

/// Cards newly selected in the given round (1-based), located in the manifest.
RetrievalList round_retrieval_list(const AuditState& state, int round);

/// Cards containing the contest, in ascending sample-number order.
std::vector<std::size_t> contest_stream(const AuditState& state, const std::string& contest_id);

/// Selection workload (sum over non-phantom cards of the largest per-contest
/// fraction) for the given targets, without thresholds.
double estimated_workload(const AuditState& state, const std::map<std::string, std::int64_t>& targets);

nlohmann::json state_to_json(const AuditState& state);
AuditState state_from_json(const nlohmann::json& j, std::vector<CardRecord> cards);
nlohmann::json round_to_json(const RoundPlan& plan);
RoundPlan round_from_json(const nlohmann::json& j);
nlohmann::json card_to_json(const CardRecord& card);
CardRecord card_from_json(const nlohmann::json& j);

}  // namespace rla
