#include "rla/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "rla/csv.hpp"

namespace rla {

using json = nlohmann::json;

namespace {

json log10_or_null(double x) {
  if (!(x > 0.0)) return nullptr;
  return std::log10(x);
}

std::string fmt(const char* spec, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

std::int64_t actual_sample(const AuditState& state, const std::string& contest_id) {
  std::int64_t n = 0;
  for (const Assertion* a : state.assertions_for(contest_id))
    if (a->tracker) n = std::max(n, a->tracker->draws);
  return n;
}

std::string outcome_source(const AuditState& state, const Contest& c) {
  if (c.status == ContestStatus::hand_count || c.status == ContestStatus::finished)
    return state.hand_counts.count(c.id) ? "hand_count" : "hand_count_pending";
  return "reported";
}

}  // namespace

double contest_margin(const AuditState& state, const std::string& contest_id) {
  double m = std::numeric_limits<double>::infinity();
  for (const Assertion* a : state.assertions_for(contest_id)) m = std::min(m, a->margin);
  return std::isinf(m) ? 0.0 : m;
}

json build_report(const AuditState& state, std::optional<double> recount_threshold) {
  json contests = json::array();
  std::int64_t total_estimate = 0;
  std::int64_t total_actual = 0;
  for (const auto& c : state.contests) {
    const double margin = contest_margin(state, c.id);
    const auto est = state.estimates.count(c.id) ? state.estimates.at(c.id) : ContestEstimate{};
    const double n = static_cast<double>(c.cards_upper_bound);
    const std::int64_t actual = actual_sample(state, c.id);
    json assertions = json::array();
    for (const Assertion* a : state.assertions_for(c.id)) {
      const auto counts = state.overstatements.count(a->id()) ? state.overstatements.at(a->id()) : OverstatementCounts{};
      assertions.push_back({{"id", a->id()},
                            {"margin", a->margin},
                            {"status", to_string(a->status)},
                            {"draws", a->tracker ? a->tracker->draws : 0},
                            {"p_value", a->tracker ? p_value(*a->tracker) : 1.0},
                            {"one_vote_overstatements", counts.one_vote},
                            {"two_vote_overstatements", counts.two_vote},
                            {"understatements", counts.understatements},
                            {"style_discrepancies", counts.style_discrepancies}});
    }
    std::vector<std::string> final_winners = c.reported_winners;
    bool tie = false;
    if (auto h = state.hand_counts.find(c.id); h != state.hand_counts.end()) {
      final_winners = h->second.winners;
      tie = h->second.tie;
    }
    const double fraction = static_cast<double>(est.with_errors) / n;
    contests.push_back({{"id", c.id},
                        {"name", c.name},
                        {"status", to_string(c.status)},
                        {"audit_mode", to_string(c.mode)},
                        {"risk_limit", c.risk_limit},
                        {"cards_upper_bound", c.cards_upper_bound},
                        {"diluted_margin", margin},
                        {"log10_margin", log10_or_null(margin)},
                        {"estimated_sample_size", est.with_errors},
                        {"zero_error_sample_size", est.zero_error},
                        {"actual_sample_size", actual},
                        {"sampling_fraction", fraction},
                        {"log10_sampling_fraction", log10_or_null(fraction)},
                        {"reported_winners", c.reported_winners},
                        {"final_winners", final_winners},
                        {"hand_count_tie", tie},
                        {"outcome_source", outcome_source(state, c)},
                        {"assertions", assertions}});
    total_estimate += est.with_errors;
    total_actual += actual;
  }

  json rounds = json::array();
  for (const auto& r : state.rounds)
    rounds.push_back({{"round", r.round},
                      {"targets", r.targets},
                      {"selected_cards", r.selected.size()},
                      {"estimated_total", r.estimated_total}});

  std::map<std::string, std::int64_t> initial_targets;
  for (const auto& c : state.contests)
    if (state.estimates.count(c.id)) initial_targets[c.id] = state.estimates.at(c.id).with_errors;

  json doc = {{"contests", contests},
              {"rounds", rounds},
              {"seed", state.spec.seed},
              {"totals",
               {{"estimated_sample_size", total_estimate},
                {"actual_sample_size", total_actual},
                {"expected_cards", state.checked ? estimated_workload(state, initial_targets) : 0.0},
                {"cards", state.cards.size()}}}};

  if (recount_threshold) {
    std::vector<std::string> omitted;
    std::map<std::string, std::int64_t> kept;
    std::int64_t kept_total = 0;
    for (const auto& [id, s] : initial_targets) {
      if (contest_margin(state, id) <= *recount_threshold) {
        omitted.push_back(id);
      } else {
        kept[id] = s;
        kept_total += s;
      }
    }
    doc["recount_threshold"] = {{"threshold", *recount_threshold},
                                {"omitted_contests", omitted},
                                {"estimated_sample_size", kept_total},
                                {"expected_cards", state.checked ? estimated_workload(state, kept) : 0.0}};
  }
  return doc;
}

std::string report_structured(const AuditState& state, std::optional<double> recount_threshold) {
  return build_report(state, recount_threshold).dump(2) + "\n";
}

std::string report_table(const AuditState& state, std::optional<double> recount_threshold) {
  const json doc = build_report(state, recount_threshold);
  std::ostringstream out;
  char line[512];
  std::snprintf(line, sizeof line, "%-16s %-11s %10s %10s %10s %10s %10s  %-14s %s\n", "contest", "status", "N_c",
                "margin", "estimate", "actual", "fraction", "source", "winners");
  out << line;
  for (const auto& c : doc["contests"]) {
    std::snprintf(line, sizeof line, "%-16s %-11s %10lld %10s %10lld %10lld %10s  %-14s %s\n",
                  c["id"].get<std::string>().c_str(), c["status"].get<std::string>().c_str(),
                  static_cast<long long>(c["cards_upper_bound"].get<std::int64_t>()),
                  fmt("%.5f", c["diluted_margin"].get<double>()).c_str(),
                  static_cast<long long>(c["estimated_sample_size"].get<std::int64_t>()),
                  static_cast<long long>(c["actual_sample_size"].get<std::int64_t>()),
                  fmt("%.5f", c["sampling_fraction"].get<double>()).c_str(),
                  c["outcome_source"].get<std::string>().c_str(),
                  join(c["final_winners"].get<std::vector<std::string>>(), " ").c_str());
    out << line;
    for (const auto& a : c["assertions"])
      out << "    " << a["id"].get<std::string>() << "  p=" << fmt("%.6g", a["p_value"].get<double>())
          << "  draws=" << a["draws"].get<std::int64_t>() << "  " << a["status"].get<std::string>() << '\n';
  }
  for (const auto& r : doc["rounds"])
    out << "round " << r["round"].get<int>() << ": " << r["selected_cards"].get<std::size_t>()
        << " cards selected, expected " << fmt("%.1f", r["estimated_total"].get<double>()) << '\n';
  const auto& t = doc["totals"];
  out << "total estimated sample " << t["estimated_sample_size"].get<std::int64_t>() << ", expected cards "
      << fmt("%.1f", t["expected_cards"].get<double>()) << '\n';
  if (doc.contains("recount_threshold")) {
    const auto& r = doc["recount_threshold"];
    out << "omitting margins <= " << fmt("%g", r["threshold"].get<double>()) << " ("
        << join(r["omitted_contests"].get<std::vector<std::string>>(), ", ") << "): estimated sample "
        << r["estimated_sample_size"].get<std::int64_t>() << ", expected cards "
        << fmt("%.1f", r["expected_cards"].get<double>()) << '\n';
  }
  return out.str();
}

std::string report_csv(const AuditState& state, std::optional<double> recount_threshold) {
  const json doc = build_report(state, recount_threshold);
  std::ostringstream out;
  out << "contest,status,cards_upper_bound,diluted_margin,log10_margin,estimated_sample_size,zero_error_sample_size,"
         "actual_sample_size,sampling_fraction,log10_sampling_fraction,outcome_source,reported_winners,final_winners,"
         "max_p_value";
  std::set<std::string> omitted;
  if (doc.contains("recount_threshold")) {
    out << ",omitted_at_threshold";
    for (const auto& id : doc["recount_threshold"]["omitted_contests"]) omitted.insert(id.get<std::string>());
  }
  out << '\n';
  auto num = [](const json& v) { return v.is_null() ? std::string() : fmt("%.10g", v.get<double>()); };
  for (const auto& c : doc["contests"]) {
    double max_p = 0.0;
    for (const auto& a : c["assertions"]) max_p = std::max(max_p, a["p_value"].get<double>());
    out << csv_field(c["id"].get<std::string>()) << ',' << c["status"].get<std::string>() << ','
        << c["cards_upper_bound"].get<std::int64_t>() << ',' << num(c["diluted_margin"]) << ','
        << num(c["log10_margin"]) << ',' << c["estimated_sample_size"].get<std::int64_t>() << ','
        << c["zero_error_sample_size"].get<std::int64_t>() << ',' << c["actual_sample_size"].get<std::int64_t>()
        << ',' << num(c["sampling_fraction"]) << ',' << num(c["log10_sampling_fraction"]) << ','
        << c["outcome_source"].get<std::string>() << ','
        << csv_field(join(c["reported_winners"].get<std::vector<std::string>>(), " ")) << ','
        << csv_field(join(c["final_winners"].get<std::vector<std::string>>(), " ")) << ',' << fmt("%.10g", max_p);
    if (doc.contains("recount_threshold")) out << ',' << (omitted.count(c["id"].get<std::string>()) ? "yes" : "no");
    out << '\n';
  }
  return out.str();
}

}  // namespace rla
