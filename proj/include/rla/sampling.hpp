#pragma once

// Consistent sampling: every card carries a fixed pseudo-random sample
// number, each contest gets a threshold, and a card is in the sample when its
// number is at or below the threshold of some contest it contains.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rla/model.hpp"

namespace rla {

struct RoundPlan {
  int round = 0;
  std::map<std::string, std::int64_t> targets;  ///< cumulative S_c
  std::map<std::string, double> fractions;      ///< S_c / N_c
  std::map<std::string, SampleNumber> thresholds;
  std::set<std::string> selected;
  /// Sum of selection probabilities over non-phantom cards.
  double estimated_total = 0.0;
};

/// Assigns u_i = SHA-256(seed ":" card_id). Throws InputError on a duplicate
/// card id or a duplicate sample number.
void assign_sample_numbers(const std::string& seed, std::vector<CardRecord>& cards);

/// Per-contest selection fractions, thresholds and the estimated workload.
/// `targets` names the contests under audit; the returned plan's selected set
/// holds only `prior_selected` until consistent_sample fills it.
RoundPlan plan_round(const std::vector<Contest>& active, const std::map<std::string, std::int64_t>& targets,
                     const std::vector<CardRecord>& cards, const std::set<std::string>& prior_selected,
                     int round = 1);

/// prior selection plus every card at or below the threshold of an audited contest it contains.
std::set<std::string> consistent_sample(const std::vector<CardRecord>& cards, const RoundPlan& plan);

struct RetrievalEntry {
  std::string card_id;
  std::string container;
  std::string tabulator;
  std::string batch;
  std::int64_t position = 0;
};

struct RetrievalList {
  std::vector<RetrievalEntry> cards;
  std::vector<std::string> phantoms;
  std::vector<std::string> not_locatable;
};

/// Locates a card in the manifest: id = id_prefix followed by the 1-based position.
class ManifestIndex {
 public:
  explicit ManifestIndex(const BallotManifest& manifest);
  std::optional<RetrievalEntry> locate(const std::string& card_id) const;

 private:
  const BallotManifest* manifest_;
  std::map<std::string, std::vector<std::size_t>> by_prefix_;
};

RetrievalList retrieval_list(const std::set<std::string>& selected, const std::vector<CardRecord>& cards,
                             const BallotManifest& manifest);

/// Delimiter-separated export with header row.
std::string retrieval_list_csv(const RetrievalList& list);

}  // namespace rla
