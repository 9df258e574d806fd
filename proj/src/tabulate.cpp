#include <algorithm>
#include <map>
#include <set>

#include "rla/model.hpp"
#include "rla/ballot.hpp"

namespace rla {

namespace {

Outcome tabulate_plurality(const Contest& contest, const std::vector<CardRecord>& records) {
  std::map<std::string, std::int64_t> tally;
  for (const auto& c : contest.candidates) tally[c] = 0;
  for (const auto& card : records) {
    const Marks* marks = card.marks(contest.id);
    if (!marks) continue;
    for (const auto& cand : plurality_votes(*marks, contest.num_winners)) {
      auto it = tally.find(cand);
      if (it != tally.end()) ++it->second;
    }
  }
  std::vector<std::pair<std::string, std::int64_t>> ranked(tally.begin(), tally.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  Outcome out;
  const std::size_t k = std::min<std::size_t>(contest.num_winners, ranked.size());
  for (std::size_t i = 0; i < k; ++i) out.winners.push_back(ranked[i].first);
  if (k < ranked.size() && ranked[k - 1].second == ranked[k].second) {
    out.tie = true;
    for (const auto& [cand, votes] : ranked) {
      if (votes == ranked[k - 1].second) out.tied_candidates.push_back(cand);
    }
  }
  return out;
}

Outcome tabulate_supermajority(const Contest& contest, const std::vector<CardRecord>& records) {
  std::map<std::string, std::int64_t> tally;
  std::int64_t valid = 0;
  for (const auto& card : records) {
    const Marks* marks = card.marks(contest.id);
    if (!marks) continue;
    auto votes = plurality_votes(*marks, 1);
    if (votes.size() != 1) continue;
    ++valid;
    ++tally[votes.front()];
  }
  Outcome out;
  if (valid == 0) return out;
  for (const auto& [cand, votes] : tally) {
    const double share = static_cast<double>(votes) / static_cast<double>(valid);
    if (share > contest.supermajority_fraction) {
      out.winners.push_back(cand);
    } else if (share == contest.supermajority_fraction) {
      out.tie = true;
      out.tied_candidates.push_back(cand);
    }
  }
  return out;
}

Outcome tabulate_irv(const Contest& contest, const std::vector<CardRecord>& records) {
  std::vector<std::vector<std::string>> ballots;
  for (const auto& card : records) {
    const Marks* marks = card.marks(contest.id);
    if (!marks) continue;
    auto ranking = ranked_preferences(*marks);
    if (!ranking.empty()) ballots.push_back(std::move(ranking));
  }
  std::set<std::string> continuing(contest.candidates.begin(), contest.candidates.end());
  Outcome out;
  while (!continuing.empty()) {
    std::map<std::string, std::int64_t> tally;
    for (const auto& c : continuing) tally[c] = 0;
    std::int64_t active = 0;
    for (const auto& ballot : ballots) {
      for (const auto& cand : ballot) {
        if (continuing.count(cand)) {
          ++tally[cand];
          ++active;
          break;
        }
      }
    }
    for (const auto& [cand, votes] : tally) {
      if (2 * votes > active || continuing.size() == 1) {
        out.winners = {cand};
        return out;
      }
    }
    std::int64_t lowest = tally.begin()->second;
    for (const auto& [cand, votes] : tally) lowest = std::min(lowest, votes);
    std::vector<std::string> lowest_set;
    for (const auto& [cand, votes] : tally) {
      if (votes == lowest) lowest_set.push_back(cand);
    }
    if (lowest_set.size() > 1) {
      out.tie = true;
      if (lowest_set.size() == continuing.size()) out.tied_candidates = lowest_set;
    }
    // std::map iteration order makes lowest_set lexicographically sorted.
    continuing.erase(lowest_set.front());
  }
  return out;
}

}  // namespace

std::vector<std::string> plurality_votes(const Marks& marks, int allowed) {
  std::vector<std::string> chosen;
  for (const auto& [cand, mark] : marks) {
    if (mark > 0) chosen.push_back(cand);
  }
  if (chosen.size() > static_cast<std::size_t>(allowed)) chosen.clear();
  return chosen;
}

std::vector<std::string> ranked_preferences(const Marks& marks) {
  std::vector<std::pair<int, std::string>> ranks;
  for (const auto& [cand, rank] : marks) {
    if (rank > 0) ranks.emplace_back(rank, cand);
  }
  std::sort(ranks.begin(), ranks.end());
  std::vector<std::string> order;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    // Two candidates at one rank: the ballot exhausts at that rank.
    if (i + 1 < ranks.size() && ranks[i + 1].first == ranks[i].first) break;
    if (i > 0 && ranks[i - 1].first == ranks[i].first) break;
    order.push_back(ranks[i].second);
  }
  return order;
}

Outcome tabulate(const Contest& contest, const std::vector<CardRecord>& records) {
  switch (contest.choice) {
    case SocialChoice::plurality: return tabulate_plurality(contest, records);
    case SocialChoice::supermajority: return tabulate_supermajority(contest, records);
    case SocialChoice::irv: return tabulate_irv(contest, records);
  }
  return {};
}

bool outcome_matches(const Contest& contest, const Outcome& outcome) {
  std::set<std::string> reported(contest.reported_winners.begin(), contest.reported_winners.end());
  std::set<std::string> winners(outcome.winners.begin(), outcome.winners.end());
  if (outcome.tied_candidates.empty()) return reported == winners;

  std::set<std::string> tied(outcome.tied_candidates.begin(), outcome.tied_candidates.end());
  std::size_t expected = contest.choice == SocialChoice::plurality ? contest.num_winners : 1;
  if (reported.size() != expected) return false;
  for (const auto& w : winners) {
    if (!tied.count(w) && !reported.count(w)) return false;
  }
  for (const auto& r : reported) {
    if (!winners.count(r) && !tied.count(r)) return false;
  }
  return true;
}

}  // namespace rla
