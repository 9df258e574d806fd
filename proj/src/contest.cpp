#include <algorithm>
#include <unordered_map>

#include "rla/model.hpp"

namespace rla {

std::string to_string(SocialChoice c) {
  switch (c) {
    case SocialChoice::plurality: return "plurality";
    case SocialChoice::supermajority: return "supermajority";
    case SocialChoice::irv: return "irv";
  }
  return "plurality";
}

std::string to_string(AuditMode m) { return m == AuditMode::polling ? "polling" : "comparison"; }

std::string to_string(ContestStatus s) {
  switch (s) {
    case ContestStatus::active: return "active";
    case ContestStatus::confirmed: return "confirmed";
    case ContestStatus::hand_count: return "hand_count";
    case ContestStatus::finished: return "finished";
  }
  return "active";
}

SocialChoice social_choice_from_string(const std::string& s) {
  if (s == "plurality") return SocialChoice::plurality;
  if (s == "supermajority") return SocialChoice::supermajority;
  if (s == "irv") return SocialChoice::irv;
  throw InputError("unknown social choice function '" + s + "'");
}

AuditMode audit_mode_from_string(const std::string& s) {
  if (s == "comparison") return AuditMode::comparison;
  if (s == "polling") return AuditMode::polling;
  throw InputError("unknown audit mode '" + s + "'");
}

ContestStatus contest_status_from_string(const std::string& s) {
  if (s == "active") return ContestStatus::active;
  if (s == "confirmed") return ContestStatus::confirmed;
  if (s == "hand_count") return ContestStatus::hand_count;
  if (s == "finished") return ContestStatus::finished;
  throw InputError("unknown contest status '" + s + "'");
}

void Contest::validate() const {
  if (id.empty()) throw InputError("contest id is empty");
  if (candidates.empty()) throw InputError("contest " + id + " has no candidates");
  std::set<std::string> cands(candidates.begin(), candidates.end());
  if (cands.size() != candidates.size()) throw InputError("contest " + id + " lists a candidate twice");
  for (const auto& w : reported_winners) {
    if (!cands.count(w)) throw InputError("contest " + id + ": reported winner '" + w + "' is not a candidate");
  }
  std::set<std::string> winners(reported_winners.begin(), reported_winners.end());
  if (winners.size() != reported_winners.size())
    throw InputError("contest " + id + " lists a reported winner twice");
  std::size_t expected = choice == SocialChoice::plurality ? static_cast<std::size_t>(num_winners) : 1;
  if (num_winners < 1) throw InputError("contest " + id + ": number of winners must be at least 1");
  if (reported_winners.size() != expected)
    throw InputError("contest " + id + ": expected " + std::to_string(expected) + " reported winner(s), got " +
                     std::to_string(reported_winners.size()));
  if (!(risk_limit > 0.0 && risk_limit < 1.0)) throw InputError("contest " + id + ": risk limit must lie in (0, 1)");
  if (cards_upper_bound < 1) throw InputError("contest " + id + ": cards upper bound must be at least 1");
  if (choice == SocialChoice::supermajority && !(supermajority_fraction >= 0.5 && supermajority_fraction < 1.0))
    throw InputError("contest " + id + ": supermajority fraction must lie in [1/2, 1)");
}

const Marks* CardRecord::marks(const std::string& contest_id) const {
  auto it = votes.find(contest_id);
  return it == votes.end() ? nullptr : &it->second;
}

std::set<std::string> card_style(const CardRecord& card) {
  std::set<std::string> style;
  for (const auto& [contest, marks] : card.votes) style.insert(contest);
  return style;
}

std::string phantom_id(const std::string& contest_id, std::int64_t k) {
  return "phantom-" + contest_id + "-" + std::to_string(k);
}

ConsistencyReport validate(const std::vector<Contest>& contests, const std::vector<CardRecord>& cvrs,
                           const BallotManifest& manifest, std::optional<std::int64_t> total_cards_bound) {
  ConsistencyReport report;
  std::unordered_map<std::string, std::int64_t> counts;
  for (const auto& card : cvrs) {
    for (const auto& [contest, marks] : card.votes) ++counts[contest];
  }
  for (const auto& contest : contests) {
    const std::int64_t n = counts[contest.id];
    if (n > contest.cards_upper_bound) {
      report.overfull_contests.push_back({contest.id, n, contest.cards_upper_bound});
    } else if (n < contest.cards_upper_bound) {
      report.phantom_cvrs_needed[contest.id] = contest.cards_upper_bound - n;
    }
    if (n == 0) continue;
    Outcome outcome = tabulate(contest, cvrs);
    if (outcome.tie) report.tied_contests.push_back(contest.id);
    if (!outcome_matches(contest, outcome)) report.winner_mismatches.push_back(contest.id);
  }
  const std::int64_t bound = total_cards_bound.value_or(manifest.total_cards);
  report.phantom_cards_needed = std::max<std::int64_t>(0, bound - manifest.total_cards);
  report.fatal = !report.overfull_contests.empty();
  return report;
}

std::vector<CardRecord> make_phantoms(const std::vector<Contest>& contests, std::vector<CardRecord> cvrs,
                                      const ConsistencyReport& report) {
  if (report.fatal) throw InputError("refusing to create phantoms: a contest has more CVRs than its card bound");
  std::unordered_map<std::string, std::int64_t> counts;
  std::unordered_map<std::string, std::int64_t> phantoms;
  for (const auto& card : cvrs) {
    for (const auto& [contest, marks] : card.votes) {
      ++counts[contest];
      if (card.phantom) ++phantoms[contest];
    }
  }
  for (const auto& contest : contests) {
    const std::int64_t missing = contest.cards_upper_bound - counts[contest.id];
    for (std::int64_t k = 1; k <= missing; ++k) {
      CardRecord phantom;
      phantom.id = phantom_id(contest.id, phantoms[contest.id] + k);
      phantom.phantom = true;
      phantom.votes[contest.id] = {};
      cvrs.push_back(std::move(phantom));
    }
  }
  return cvrs;
}

}  // namespace rla
