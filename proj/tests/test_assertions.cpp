#include <random>

#include "doctest.h"
#include "rla/assertions.hpp"

using namespace rla;

namespace {

Contest contest(const std::string& id, std::vector<std::string> cands, std::vector<std::string> winners,
                std::int64_t bound) {
  Contest c;
  c.id = id;
  c.candidates = std::move(cands);
  c.reported_winners = std::move(winners);
  c.cards_upper_bound = bound;
  return c;
}

CardRecord card(const std::string& id, const std::string& contest_id, Marks m) {
  CardRecord r;
  r.id = id;
  r.votes[contest_id] = std::move(m);
  return r;
}

AssorterSpec pair(const std::string& w, const std::string& l, int allowed = 1) {
  AssorterSpec s;
  s.winner = w;
  s.loser = l;
  s.allowed_marks = allowed;
  return s;
}

}  // namespace

TEST_CASE("plurality pair assorter") {
  const auto s = pair("w", "l");
  CHECK(assort(s, nullptr) == 0.5);
  const Marks for_w{{"w", 1}}, for_l{{"l", 1}}, other{{"o", 1}}, over{{"w", 1}, {"l", 1}}, none{};
  CHECK(assort(s, &for_w) == 1.0);
  CHECK(assort(s, &for_l) == 0.0);
  CHECK(assort(s, &other) == 0.5);
  CHECK(assort(s, &over) == 0.5);
  CHECK(assort(s, &none) == 0.5);
  const auto s2 = pair("w", "l", 2);
  CHECK(assort(s2, &over) == 0.5);
  const Marks w_and_o{{"w", 1}, {"o", 1}};
  CHECK(assort(s2, &w_and_o) == 1.0);
  CHECK(s.upper_bound() == 1.0);
  CHECK(s.label() == "w>l");
}

TEST_CASE("supermajority assorter") {
  AssorterSpec s;
  s.kind = AssorterSpec::Kind::supermajority;
  s.winner = "yes";
  s.fraction = 2.0 / 3.0;
  const Marks yes{{"yes", 1}}, no{{"no", 1}}, over{{"yes", 1}, {"no", 1}};
  CHECK(s.upper_bound() == doctest::Approx(0.75));
  CHECK(assort(s, &yes) == doctest::Approx(0.75));
  CHECK(assort(s, &no) == 0.0);
  CHECK(assort(s, &over) == 0.5);
  CHECK(assort(s, nullptr) == 0.5);
}

TEST_CASE("RAIRE assorters") {
  AssorterSpec neb;
  neb.kind = AssorterSpec::Kind::raire_neb;
  neb.winner = "a";
  neb.loser = "b";
  const Marks a_first{{"a", 1}, {"b", 2}}, b_over_a{{"c", 1}, {"b", 2}, {"a", 3}}, a_over_b{{"c", 1}, {"a", 2}, {"b", 3}};
  CHECK(assort(neb, &a_first) == 1.0);
  CHECK(assort(neb, &b_over_a) == 0.0);
  CHECK(assort(neb, &a_over_b) == 0.5);

  AssorterSpec nen;
  nen.kind = AssorterSpec::Kind::raire_nen;
  nen.winner = "a";
  nen.loser = "b";
  nen.continuing = {"a", "b"};
  CHECK(assort(nen, &a_over_b) == 1.0);
  CHECK(assort(nen, &b_over_a) == 0.0);
  const Marks only_c{{"c", 1}};
  CHECK(assort(nen, &only_c) == 0.5);
  nen.continuing = {"a", "b", "c"};
  CHECK(assort(nen, &a_over_b) == 0.5);
}

TEST_CASE("assertions built per social choice function") {
  Contest p = contest("p", {"a", "b", "c"}, {"a"}, 10);
  CHECK(build_assertions(p, std::nullopt).size() == 2);
  p.num_winners = 2;
  p.reported_winners = {"a", "b"};
  CHECK(build_assertions(p, std::nullopt).size() == 2);

  Contest irv = contest("i", {"a", "b", "c"}, {"a"}, 10);
  irv.choice = SocialChoice::irv;
  CHECK_THROWS_AS(build_assertions(irv, std::nullopt), InputError);
  RaireEntry neb{RaireEntry::Type::neb, "a", "c", {}};
  RaireEntry nen{RaireEntry::Type::nen, "a", "b", {"b", "a"}};
  const auto built = build_assertions(irv, std::vector<RaireEntry>{neb, nen});
  REQUIRE(built.size() == 2);
  CHECK(built[1].spec.continuing == std::vector<std::string>{"a", "b"});
  RaireEntry bad{RaireEntry::Type::nen, "a", "b", {"a", "c"}};
  CHECK_THROWS_AS(build_assertions(irv, std::vector<RaireEntry>{bad}), InputError);
}

TEST_CASE("diluted margin over the contest's cards, phantoms at the midpoint") {
  std::vector<CardRecord> records;
  for (int i = 0; i < 6; ++i) records.push_back(card("w" + std::to_string(i), "c", {{"w", 1}}));
  for (int i = 0; i < 3; ++i) records.push_back(card("l" + std::to_string(i), "c", {{"l", 1}}));
  records.push_back(card("blank", "c", {}));
  records.push_back(card("other", "d", {{"x", 1}}));
  Contest c = contest("c", {"w", "l"}, {"w"}, 10);
  Assertion a = set_margin(build_assertions(c, std::nullopt).front(), records);
  CHECK(a.margin == doctest::Approx((6.0 - 3.0) / 10.0));
  CHECK(a.overstatement_bound == doctest::Approx(2.0 / (2.0 - 0.3)));
  CHECK_FALSE(a.reported_loser_ahead);

  CardRecord ph;
  ph.id = "ph";
  ph.phantom = true;
  ph.votes["c"] = {};
  records.push_back(ph);
  a = set_margin(a, records);
  CHECK(a.margin == doctest::Approx(3.0 / 11.0));
}

TEST_CASE("overstatements") {
  Contest c = contest("c", {"w", "l"}, {"w"}, 10);
  Assertion a = build_assertions(c, std::nullopt).front();
  a.margin = 0.2;
  const CardRecord cvr_w = card("1", "c", {{"w", 1}});
  const CardRecord mvr_l = card("1", "c", {{"l", 1}});
  const CardRecord mvr_blank = card("1", "c", {});
  CardRecord not_found;
  not_found.id = "1";
  not_found.not_found = true;
  CardRecord other_style = card("1", "d", {{"x", 1}});
  CHECK(overstatement(a, cvr_w, &cvr_w).value == 0.0);
  CHECK(overstatement(a, cvr_w, &mvr_l).value == 1.0);
  CHECK(overstatement(a, cvr_w, &mvr_blank).value == 0.5);
  CHECK(overstatement(a, mvr_l, &cvr_w).value == -1.0);
  CHECK(overstatement(a, cvr_w, nullptr).value == 1.0);
  CHECK(overstatement(a, cvr_w, &not_found).value == 1.0);
  const Overstatement style = overstatement(a, cvr_w, &other_style);
  CHECK(style.style_discrepancy);
  CHECK(style.value == 0.5);
  CardRecord ph;
  ph.id = "p";
  ph.phantom = true;
  ph.votes["c"] = {};
  CHECK(overstatement(a, ph, nullptr).value == 0.5);
  CHECK(overstatement_assorter(a, 0.0) == doctest::Approx(1.0 / 1.8));
  CHECK(overstatement_assorter(a, 1.0) == 0.0);
}

TEST_CASE("overstatement assorter stays within its bound") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double u = 0.5 + unit(rng) * 2.0;
    const double v = unit(rng) * 0.99;
    const double omega = (2.0 * unit(rng) - 1.0) * u;
    const double b = overstatement_assorter_value(omega, v, u);
    CHECK(b >= 0.0);
    CHECK(b <= 2.0 * u / (2.0 * u - v) + 1e-12);
  }
}

TEST_CASE("overstatement assertion holds exactly when the true outcome agrees") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 20 + static_cast<int>(rng() % 40);
    std::vector<CardRecord> cvrs, mvrs;
    for (int i = 0; i < n; ++i) {
      auto pick = [&]() -> Marks {
        switch (rng() % 3) {
          case 0: return {{"w", 1}};
          case 1: return {{"l", 1}};
          default: return {};
        }
      };
      cvrs.push_back(card(std::to_string(i), "c", pick()));
      mvrs.push_back(card(std::to_string(i), "c", pick()));
    }
    Contest c = contest("c", {"w", "l"}, {"w"}, n);
    Assertion a = set_margin(build_assertions(c, std::nullopt).front(), cvrs);
    if (a.margin <= 0.0) continue;
    double true_mean = 0.0, b_mean = 0.0;
    for (int i = 0; i < n; ++i) {
      true_mean += assort(a.spec, "c", mvrs[i]);
      b_mean += overstatement_assorter(a, overstatement(a, cvrs[i], &mvrs[i]).value);
    }
    true_mean /= n;
    b_mean /= n;
    CAPTURE(true_mean);
    CAPTURE(b_mean);
    CHECK((true_mean > 0.5 + 1e-12) == (b_mean > 0.5 + 1e-12));
  }
}

TEST_CASE("risk measurement over sampled pairs") {
  std::vector<CardRecord> cvrs;
  for (int i = 0; i < 600; ++i) cvrs.push_back(card(std::to_string(i), "c", {{"w", 1}}));
  for (int i = 600; i < 1000; ++i) cvrs.push_back(card(std::to_string(i), "c", {{"l", 1}}));
  Contest c = contest("c", {"w", "l"}, {"w"}, 1000);
  Assertion a = set_margin(build_assertions(c, std::nullopt).front(), cvrs);
  start_tracking(a, 1000, AuditMode::comparison, {});
  Assertion b = a;

  std::vector<SamplePair> complete, missing;
  for (int i = 0; i < 60; ++i) {
    complete.push_back({&cvrs[i * 16], &cvrs[i * 16]});
    missing.push_back({&cvrs[i * 16], i == 3 ? nullptr : &cvrs[i * 16]});
  }
  const auto p_complete = measure_risk(a, complete, 0.05);
  const auto p_missing = measure_risk(b, missing, 0.05);
  CHECK(p_missing.back() > p_complete.back());
  CHECK(a.status == AssertionStatus::confirmed);

  Assertion d = set_margin(build_assertions(c, std::nullopt).front(), cvrs);
  start_tracking(d, 1000, AuditMode::comparison, {});
  std::vector<SamplePair> dup = {{&cvrs[0], &cvrs[0]}, {&cvrs[0], &cvrs[0]}};
  CHECK_THROWS_AS(measure_risk(d, dup, 0.05), InputError);
}

TEST_CASE("polling uses the manual record's assorter value") {
  Contest c = contest("c", {"w", "l"}, {"w"}, 10);
  Assertion a = build_assertions(c, std::nullopt).front();
  a.reported_mean = 0.7;
  start_tracking(a, 10, AuditMode::polling, {});
  CHECK(a.tracker->upper == 1.0);
  CHECK(a.tracker->eta == doctest::Approx(0.7));
  const CardRecord cvr = card("1", "c", {{"w", 1}});
  const CardRecord mvr = card("1", "c", {{"l", 1}});
  CHECK(observed_value(a, {&cvr, &mvr}) == 0.0);
  CHECK(observed_value(a, {&cvr, &cvr}) == 1.0);
  CHECK(observed_value(a, {&cvr, nullptr}) == 0.0);
}
