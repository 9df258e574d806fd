#include "rla/sampling.hpp"

#include "rla/csv.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

namespace rla {

void assign_sample_numbers(const std::string& seed, std::vector<CardRecord>& cards) {
  if (seed.empty()) throw InputError("seed must be nonempty");
  std::unordered_set<std::string> ids;
  ids.reserve(cards.size());
  for (const auto& card : cards) {
    if (!ids.insert(card.id).second) throw InputError("duplicate card id: " + card.id);
  }
  std::vector<SampleNumber> numbers;
  numbers.reserve(cards.size());
  for (auto& card : cards) {
    card.sample_number = hash_sample_number(seed, card.id);
    numbers.push_back(*card.sample_number);
  }
  std::sort(numbers.begin(), numbers.end());
  if (std::adjacent_find(numbers.begin(), numbers.end()) != numbers.end())
    throw InputError("duplicate sample numbers; choose a different seed");
}

RoundPlan plan_round(const std::vector<Contest>& active, const std::map<std::string, std::int64_t>& targets,
                     const std::vector<CardRecord>& cards, const std::set<std::string>& prior_selected, int round) {
  RoundPlan plan;
  plan.round = round;
  plan.selected = prior_selected;
  for (const auto& contest : active) {
    auto it = targets.find(contest.id);
    const std::int64_t target = it == targets.end() ? 0 : it->second;
    if (target < 0 || target > contest.cards_upper_bound)
      throw InputError("contest " + contest.id + ": target " + std::to_string(target) + " outside [0, " +
                       std::to_string(contest.cards_upper_bound) + "]");
    plan.targets[contest.id] = target;
    plan.fractions[contest.id] = static_cast<double>(target) / static_cast<double>(contest.cards_upper_bound);
  }

  std::unordered_map<std::string, std::vector<SampleNumber>> numbers;
  for (const auto& card : cards) {
    if (!card.sample_number) continue;
    for (const auto& [contest, marks] : card.votes) {
      if (plan.targets.count(contest)) numbers[contest].push_back(*card.sample_number);
    }
  }
  for (const auto& [contest, target] : plan.targets) {
    auto& list = numbers[contest];
    if (target == 0) {
      plan.thresholds[contest] = SampleNumber{};
      continue;
    }
    if (static_cast<std::size_t>(target) > list.size())
      throw InputError("contest " + contest + ": target exceeds cards with sample numbers");
    std::nth_element(list.begin(), list.begin() + (target - 1), list.end());
    plan.thresholds[contest] = list[target - 1];
  }

  double total = 0.0;
  for (const auto& card : cards) {
    if (card.phantom) continue;
    if (prior_selected.count(card.id)) {
      total += 1.0;
      continue;
    }
    double p = 0.0;
    for (const auto& [contest, marks] : card.votes) {
      auto f = plan.fractions.find(contest);
      if (f != plan.fractions.end()) p = std::max(p, f->second);
    }
    total += p;
  }
  plan.estimated_total = total;
  return plan;
}

std::set<std::string> consistent_sample(const std::vector<CardRecord>& cards, const RoundPlan& plan) {
  std::set<std::string> selected = plan.selected;
  for (const auto& card : cards) {
    if (!card.sample_number) continue;
    for (const auto& [contest, marks] : card.votes) {
      auto t = plan.thresholds.find(contest);
      if (t == plan.thresholds.end() || plan.targets.at(contest) == 0) continue;
      if (*card.sample_number <= t->second) {
        selected.insert(card.id);
        break;
      }
    }
  }
  return selected;
}

ManifestIndex::ManifestIndex(const BallotManifest& manifest) : manifest_(&manifest) {
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) by_prefix_[manifest.entries[i].id_prefix].push_back(i);
}

std::optional<RetrievalEntry> ManifestIndex::locate(const std::string& card_id) const {
  // The position is a trailing run of digits; try every split inside that run.
  std::size_t digits_start = card_id.size();
  while (digits_start > 0 && std::isdigit(static_cast<unsigned char>(card_id[digits_start - 1]))) --digits_start;
  for (std::size_t split = digits_start; split < card_id.size(); ++split) {
    const std::string suffix = card_id.substr(split);
    if (suffix.size() > 1 && suffix[0] == '0') continue;
    if (suffix.size() > 15) continue;
    auto it = by_prefix_.find(card_id.substr(0, split));
    if (it == by_prefix_.end()) continue;
    const std::int64_t position = std::stoll(suffix);
    for (std::size_t idx : it->second) {
      const auto& entry = manifest_->entries[idx];
      if (position >= 1 && position <= entry.card_count)
        return RetrievalEntry{card_id, entry.container, entry.tabulator, entry.batch, position};
    }
  }
  return std::nullopt;
}

RetrievalList retrieval_list(const std::set<std::string>& selected, const std::vector<CardRecord>& cards,
                             const BallotManifest& manifest) {
  std::unordered_set<std::string> phantom_ids;
  for (const auto& card : cards) {
    if (card.phantom) phantom_ids.insert(card.id);
  }
  ManifestIndex index(manifest);
  RetrievalList list;
  for (const auto& id : selected) {
    if (phantom_ids.count(id)) {
      list.phantoms.push_back(id);
    } else if (auto entry = index.locate(id)) {
      list.cards.push_back(*entry);
    } else {
      list.not_locatable.push_back(id);
    }
  }
  std::sort(list.cards.begin(), list.cards.end(), [](const RetrievalEntry& a, const RetrievalEntry& b) {
    return std::tie(a.container, a.tabulator, a.batch, a.position) <
           std::tie(b.container, b.tabulator, b.batch, b.position);
  });
  return list;
}

std::string retrieval_list_csv(const RetrievalList& list) {
  std::ostringstream out;
  out << "section,card_id,container,tabulator,batch,position\n";
  for (const auto& e : list.cards)
    out << "retrieve," << csv_field(e.card_id) << ',' << csv_field(e.container) << ',' << csv_field(e.tabulator)
        << ',' << csv_field(e.batch) << ',' << e.position << '\n';
  for (const auto& id : list.phantoms) out << "phantom," << csv_field(id) << ",,,,\n";
  for (const auto& id : list.not_locatable) out << "not_locatable," << csv_field(id) << ",,,,\n";
  return out.str();
}

}  // namespace rla
