#pragma once

// Domain types shared by every audit stage: contests, card records,
// ballot manifests, and the consistency report produced before sampling.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "rla/sample_number.hpp"

namespace rla {

/// Bad user input: malformed configuration, impossible parameters, unknown ids.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SocialChoice { plurality, supermajority, irv };
enum class AuditMode { comparison, polling };
enum class ContestStatus { active, confirmed, hand_count, finished };

std::string to_string(SocialChoice c);
std::string to_string(AuditMode m);
std::string to_string(ContestStatus s);
SocialChoice social_choice_from_string(const std::string& s);
AuditMode audit_mode_from_string(const std::string& s);
ContestStatus contest_status_from_string(const std::string& s);

struct Contest {
  std::string id;
  std::string name;
  SocialChoice choice = SocialChoice::plurality;
  /// Number of winners; also the number of marks a valid plurality vote may carry.
  int num_winners = 1;
  /// Winning share for supermajority contests.
  double supermajority_fraction = 0.5;
  std::vector<std::string> candidates;
  std::vector<std::string> reported_winners;
  /// N_c: upper bound on the number of cards containing the contest.
  std::int64_t cards_upper_bound = 0;
  double risk_limit = 0.05;
  AuditMode mode = AuditMode::comparison;
  ContestStatus status = ContestStatus::active;

  /// Throws InputError when an invariant is violated.
  void validate() const;
};

/// Candidate id -> mark. A plurality vote is 1; an IRV mark is its rank (1 = first).
using Marks = std::map<std::string, int>;

struct CardRecord {
  std::string id;
  std::map<std::string, Marks> votes;
  bool phantom = false;
  /// Set only on manual records: the physical card could not be located.
  bool not_found = false;
  std::optional<SampleNumber> sample_number;

  bool contains(const std::string& contest_id) const { return votes.count(contest_id) > 0; }
  /// Marks for a contest, or nullptr when the card does not contain it.
  const Marks* marks(const std::string& contest_id) const;
};

/// The set of contests on a card, inferred from its record.
std::set<std::string> card_style(const CardRecord& card);

struct ManifestEntry {
  std::string container;
  std::string tabulator;
  std::string batch;
  std::int64_t card_count = 0;
  std::string id_prefix;
};

struct BallotManifest {
  std::vector<ManifestEntry> entries;
  std::int64_t total_cards = 0;
};

struct OverfullContest {
  std::string contest_id;
  std::int64_t cvr_count = 0;
  std::int64_t upper_bound = 0;

  bool operator==(const OverfullContest&) const = default;
};

struct ConsistencyReport {
  std::vector<std::string> winner_mismatches;
  /// Contests whose CVR tabulation is tied; not an error, but surfaced.
  std::vector<std::string> tied_contests;
  std::vector<OverfullContest> overfull_contests;
  std::map<std::string, std::int64_t> phantom_cvrs_needed;
  std::int64_t phantom_cards_needed = 0;
  bool fatal = false;
};

struct Outcome {
  std::vector<std::string> winners;
  /// True when the winner set depended on breaking a tie.
  bool tie = false;
  /// For plurality ties: the candidates tied at the winner/loser boundary.
  std::vector<std::string> tied_candidates;
};

/// Winner set implied by the records under the contest's social choice function.
/// Records lacking the contest are ignored.
Outcome tabulate(const Contest& contest, const std::vector<CardRecord>& records);

/// True when the reported winners are consistent with the tabulated outcome
/// (for ties, any tie-breaking of the boundary candidates is accepted).
bool outcome_matches(const Contest& contest, const Outcome& outcome);

/// Cross-checks contests, CVRs and manifest. `total_cards_bound` is a trustworthy
/// upper bound on cards cast in the election, when one is known.
ConsistencyReport validate(const std::vector<Contest>& contests, const std::vector<CardRecord>& cvrs,
                           const BallotManifest& manifest,
                           std::optional<std::int64_t> total_cards_bound = std::nullopt);

/// Appends one single-contest phantom per missing CVR. Idempotent.
std::vector<CardRecord> make_phantoms(const std::vector<Contest>& contests,
                                      std::vector<CardRecord> cvrs,
                                      const ConsistencyReport& report);

std::string phantom_id(const std::string& contest_id, std::int64_t k);

}  // namespace rla
