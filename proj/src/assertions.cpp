#include "rla/assertions.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "rla/ballot.hpp"

namespace rla {

namespace {

double plurality_pair(const AssorterSpec& spec, const Marks& marks) {
  const auto votes = plurality_votes(marks, spec.allowed_marks);
  const bool for_winner = std::find(votes.begin(), votes.end(), spec.winner) != votes.end();
  const bool for_loser = std::find(votes.begin(), votes.end(), spec.loser) != votes.end();
  return ((for_winner ? 1.0 : 0.0) - (for_loser ? 1.0 : 0.0) + 1.0) / 2.0;
}

double supermajority(const AssorterSpec& spec, const Marks& marks) {
  const auto votes = plurality_votes(marks, 1);
  if (votes.size() != 1) return 0.5;
  return votes.front() == spec.winner ? 1.0 / (2.0 * spec.fraction) : 0.0;
}

double raire_neb(const AssorterSpec& spec, const Marks& marks) {
  const auto ranking = ranked_preferences(marks);
  auto w = std::find(ranking.begin(), ranking.end(), spec.winner);
  auto l = std::find(ranking.begin(), ranking.end(), spec.loser);
  if (w == ranking.begin() && w != ranking.end()) return 1.0;
  if (l != ranking.end() && (w == ranking.end() || l < w)) return 0.0;
  return 0.5;
}

double raire_nen(const AssorterSpec& spec, const Marks& marks) {
  const auto ranking = ranked_preferences(marks);
  for (const auto& cand : ranking) {
    if (std::find(spec.continuing.begin(), spec.continuing.end(), cand) == spec.continuing.end()) continue;
    if (cand == spec.winner) return 1.0;
    if (cand == spec.loser) return 0.0;
    return 0.5;
  }
  return 0.5;
}

}  // namespace

double AssorterSpec::upper_bound() const {
  return kind == Kind::supermajority ? 1.0 / (2.0 * fraction) : 1.0;
}

std::string AssorterSpec::label() const {
  switch (kind) {
    case Kind::plurality_pair: return winner + ">" + loser;
    case Kind::supermajority: return winner + ">" + std::to_string(fraction);
    case Kind::raire_neb: return "NEB:" + winner + ">" + loser;
    case Kind::raire_nen: {
      std::string s = "NEN:" + winner + ">" + loser + "|{";
      for (std::size_t i = 0; i < continuing.size(); ++i) s += (i ? "," : "") + continuing[i];
      return s + "}";
    }
  }
  return winner;
}

double assort(const AssorterSpec& spec, const Marks* marks) {
  static const Marks kEmpty;
  const Marks& m = marks ? *marks : kEmpty;
  switch (spec.kind) {
    case AssorterSpec::Kind::plurality_pair: return plurality_pair(spec, m);
    case AssorterSpec::Kind::supermajority: return supermajority(spec, m);
    case AssorterSpec::Kind::raire_neb: return raire_neb(spec, m);
    case AssorterSpec::Kind::raire_nen: return raire_nen(spec, m);
  }
  return 0.5;
}

double assort(const AssorterSpec& spec, const std::string& contest_id, const CardRecord& card) {
  return assort(spec, card.marks(contest_id));
}

std::string to_string(AssertionStatus s) {
  switch (s) {
    case AssertionStatus::open: return "open";
    case AssertionStatus::confirmed: return "confirmed";
    case AssertionStatus::hand_counted: return "hand_counted";
  }
  return "open";
}

AssertionStatus assertion_status_from_string(const std::string& s) {
  if (s == "open") return AssertionStatus::open;
  if (s == "confirmed") return AssertionStatus::confirmed;
  if (s == "hand_counted") return AssertionStatus::hand_counted;
  throw InputError("unknown assertion status '" + s + "'");
}

std::vector<Assertion> build_assertions(const Contest& contest, const std::optional<std::vector<RaireEntry>>& raire) {
  std::vector<Assertion> out;
  auto make = [&](AssorterSpec spec) {
    Assertion a;
    a.contest_id = contest.id;
    a.spec = std::move(spec);
    out.push_back(std::move(a));
  };
  switch (contest.choice) {
    case SocialChoice::plurality: {
      std::set<std::string> winners(contest.reported_winners.begin(), contest.reported_winners.end());
      for (const auto& w : contest.reported_winners) {
        for (const auto& l : contest.candidates) {
          if (winners.count(l)) continue;
          AssorterSpec spec;
          spec.kind = AssorterSpec::Kind::plurality_pair;
          spec.winner = w;
          spec.loser = l;
          spec.allowed_marks = contest.num_winners;
          make(std::move(spec));
        }
      }
      break;
    }
    case SocialChoice::supermajority:
      for (const auto& w : contest.reported_winners) {
        AssorterSpec spec;
        spec.kind = AssorterSpec::Kind::supermajority;
        spec.winner = w;
        spec.fraction = contest.supermajority_fraction;
        make(std::move(spec));
      }
      break;
    case SocialChoice::irv: {
      if (!raire || raire->empty()) throw InputError("contest " + contest.id + ": assertions unavailable");
      std::set<std::string> cands(contest.candidates.begin(), contest.candidates.end());
      for (const auto& entry : *raire) {
        if (!cands.count(entry.winner) || !cands.count(entry.loser) || entry.winner == entry.loser)
          throw InputError("contest " + contest.id + ": RAIRE entry names unknown or identical candidates");
        AssorterSpec spec;
        spec.winner = entry.winner;
        spec.loser = entry.loser;
        if (entry.type == RaireEntry::Type::neb) {
          spec.kind = AssorterSpec::Kind::raire_neb;
        } else {
          spec.kind = AssorterSpec::Kind::raire_nen;
          spec.continuing = entry.continuing;
          std::sort(spec.continuing.begin(), spec.continuing.end());
          const bool has_both =
              std::binary_search(spec.continuing.begin(), spec.continuing.end(), entry.winner) &&
              std::binary_search(spec.continuing.begin(), spec.continuing.end(), entry.loser);
          if (!has_both)
            throw InputError("contest " + contest.id + ": NEN continuing set must contain winner and loser");
        }
        make(std::move(spec));
      }
      break;
    }
  }
  return out;
}

Assertion set_margin(Assertion assertion, const std::vector<CardRecord>& records) {
  const double u = assertion.spec.upper_bound();
  double total = 0.0;
  std::int64_t n = 0;
  for (const auto& card : records) {
    const Marks* marks = card.marks(assertion.contest_id);
    if (!marks) continue;
    total += card.phantom ? u / 2.0 : assort(assertion.spec, marks);
    ++n;
  }
  if (n == 0) throw InputError("no records contain contest " + assertion.contest_id);
  assertion.reported_mean = total / static_cast<double>(n);
  assertion.margin = 2.0 * assertion.reported_mean - 1.0;
  assertion.overstatement_bound = 2.0 * u / (2.0 * u - assertion.margin);
  assertion.reported_loser_ahead = assertion.reported_mean <= 0.5;
  return assertion;
}

Overstatement overstatement(const Assertion& assertion, const CardRecord& cvr, const CardRecord* mvr) {
  const double u = assertion.spec.upper_bound();
  Overstatement out;
  const double cvr_value = cvr.phantom ? u / 2.0 : assort(assertion.spec, cvr.marks(assertion.contest_id));
  double mvr_value = 0.0;
  if (!cvr.phantom && mvr && !mvr->not_found) {
    const Marks* marks = mvr->marks(assertion.contest_id);
    out.style_discrepancy = marks == nullptr;
    mvr_value = assort(assertion.spec, marks);
  }
  out.value = cvr_value - mvr_value;
  return out;
}

double overstatement_assorter(const Assertion& assertion, double omega) {
  return overstatement_assorter_value(omega, assertion.margin, assertion.spec.upper_bound());
}

void start_tracking(Assertion& assertion, std::int64_t population, AuditMode mode, const EtaConfig& eta_config) {
  const double u = assertion.spec.upper_bound();
  if (mode == AuditMode::comparison) {
    double eta = choose_eta(eta_config, assertion.margin, u);
    assertion.tracker = AlphaState::fresh(population, assertion.overstatement_bound, eta, mode);
  } else {
    double eta = eta_config.kind == EtaConfig::Kind::fixed ? eta_config.eta : assertion.reported_mean;
    assertion.tracker = AlphaState::fresh(population, u, std::min(eta, u), mode);
  }
}

double observed_value(const Assertion& assertion, const SamplePair& pair, bool* style_discrepancy) {
  if (!pair.cvr) throw std::invalid_argument("sample pair without a CVR");
  if (assertion.tracker && assertion.tracker->mode == AuditMode::polling) {
    if (pair.cvr->phantom || !pair.mvr || pair.mvr->not_found) return 0.0;
    const Marks* marks = pair.mvr->marks(assertion.contest_id);
    if (style_discrepancy) *style_discrepancy = marks == nullptr;
    return assort(assertion.spec, marks);
  }
  Overstatement omega = overstatement(assertion, *pair.cvr, pair.mvr);
  if (style_discrepancy) *style_discrepancy = omega.style_discrepancy;
  return overstatement_assorter(assertion, omega.value);
}

std::vector<double> measure_risk(Assertion& assertion, const std::vector<SamplePair>& pairs, double risk_limit) {
  if (!assertion.tracker) throw std::invalid_argument("assertion " + assertion.id() + " has no tracker");
  std::set<std::string> seen;
  for (const auto& pair : pairs) {
    if (!pair.cvr) throw std::invalid_argument("sample pair without a CVR");
    if (!seen.insert(pair.cvr->id).second) throw InputError("duplicate card id in sample stream: " + pair.cvr->id);
  }
  std::vector<double> trajectory;
  trajectory.reserve(pairs.size());
  for (const auto& pair : pairs) {
    assertion.tracker = alpha_step(*assertion.tracker, observed_value(assertion, pair));
    const double p = p_value(*assertion.tracker);
    trajectory.push_back(p);
    if (p <= risk_limit && assertion.status == AssertionStatus::open) assertion.status = AssertionStatus::confirmed;
  }
  return trajectory;
}

}  // namespace rla
