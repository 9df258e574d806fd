#pragma once

// Half-average assertions ("the mean of assorter a over all cards exceeds
// 1/2") and the comparison-audit overstatement machinery built on them.

#include <optional>
#include <string>
#include <vector>

#include "rla/model.hpp"
#include "rla/risk.hpp"

namespace rla {

struct AssorterSpec {
  enum class Kind { plurality_pair, supermajority, raire_neb, raire_nen };
  Kind kind = Kind::plurality_pair;
  std::string winner;
  std::string loser;  ///< unused for supermajority
  /// Marks a valid plurality vote may carry (vote-for-k).
  int allowed_marks = 1;
  double fraction = 0.5;  ///< supermajority share
  std::vector<std::string> continuing;  ///< NEN continuing set

  /// u: the assorter's upper bound.
  double upper_bound() const;
  /// Stable identifier, e.g. "Alice>Bob" or "NEN:Alice>Bob|{Alice,Bob,Carol}".
  std::string label() const;
};

/// Assorter value of a mark set; nullptr or empty marks count as a non-vote.
double assort(const AssorterSpec& spec, const Marks* marks);
double assort(const AssorterSpec& spec, const std::string& contest_id, const CardRecord& card);

enum class AssertionStatus { open, confirmed, hand_counted };
std::string to_string(AssertionStatus s);
AssertionStatus assertion_status_from_string(const std::string& s);

struct Assertion {
  std::string contest_id;
  AssorterSpec spec;
  double reported_mean = 0.0;  ///< mean assorter value over all N_c records
  double margin = 0.0;         ///< 2 * reported_mean - 1
  double overstatement_bound = 0.0;  ///< 2u / (2u - margin)
  /// Set when the CVRs do not show the reported winner ahead.
  bool reported_loser_ahead = false;
  AssertionStatus status = AssertionStatus::open;
  std::optional<AlphaState> tracker;

  std::string id() const { return contest_id + ":" + spec.label(); }
};

/// One entry of an imported RAIRE assertion file.
struct RaireEntry {
  enum class Type { neb, nen };
  Type type = Type::neb;
  std::string winner;
  std::string loser;
  std::vector<std::string> continuing;
};

/// Pairwise winner/loser assertions for plurality, one per winner for
/// supermajority, one per entry for IRV. Throws InputError for IRV without
/// RAIRE entries.
std::vector<Assertion> build_assertions(const Contest& contest, const std::optional<std::vector<RaireEntry>>& raire);

/// Fills reported mean, margin and overstatement bound from the records that
/// contain the contest (phantoms score the assorter midpoint).
Assertion set_margin(Assertion assertion, const std::vector<CardRecord>& records);

struct Overstatement {
  double value = 0.0;
  /// The manual record lacks a contest the CVR claims.
  bool style_discrepancy = false;
};

/// a(CVR) - a(MVR). `mvr` is nullptr (or flagged not_found) when the card was not located.
Overstatement overstatement(const Assertion& assertion, const CardRecord& cvr, const CardRecord* mvr);

/// B(omega) = (1 - omega/u) / (2 - v/u).
double overstatement_assorter(const Assertion& assertion, double omega);

/// Initializes the assertion's tracker for a population of `population` cards.
/// Comparison audits bound values by the overstatement bound; polling audits by u.
void start_tracking(Assertion& assertion, std::int64_t population, AuditMode mode, const EtaConfig& eta_config);

/// One sampled card for an assertion's risk measurement.
struct SamplePair {
  const CardRecord* cvr = nullptr;
  const CardRecord* mvr = nullptr;
};

/// Observed value fed to the martingale for one pair.
double observed_value(const Assertion& assertion, const SamplePair& pair, bool* style_discrepancy = nullptr);

/// Feeds the pairs into the assertion's tracker and returns the p-value after
/// each draw. Rejects duplicate card ids. Marks the assertion confirmed when
/// the p-value reaches `risk_limit`.
std::vector<double> measure_risk(Assertion& assertion, const std::vector<SamplePair>& pairs, double risk_limit);

}  // namespace rla
