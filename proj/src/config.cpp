#include "rla/config.hpp"

#include <set>

namespace rla {

using json = nlohmann::json;

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace

void AuditSpec::validate() const {
  if (!(inflation_factor >= 1.0)) throw InputError("inflation_factor must be at least 1");
  error_model.validate();
  if (risk_function.p1 < 0 || risk_function.p2 < 0 || risk_function.p1 + risk_function.p2 >= 1)
    throw InputError("risk_function rates must be nonnegative and sum to less than 1");
  if (risk_function.kind == EtaConfig::Kind::fixed && !(risk_function.eta > 0.0))
    throw InputError("alpha_fixed_eta requires a positive eta");
  if (round_strategy.kind == RoundStrategy::Kind::simulation_quantile) {
    if (!(round_strategy.quantile > 0.0 && round_strategy.quantile < 1.0))
      throw InputError("simulation quantile must lie in (0, 1)");
    if (round_strategy.replications < 1) throw InputError("simulation needs at least one replication");
  }
  if (cvr_paths.empty()) throw InputError("no CVR files configured");
  if (manifest_path.empty()) throw InputError("no ballot manifest configured");
}

json to_json(const Contest& c) {
  json j;
  j["id"] = c.id;
  j["name"] = c.name;
  j["choice_function"] = to_string(c.choice);
  j["num_winners"] = c.num_winners;
  if (c.choice == SocialChoice::supermajority) j["supermajority_fraction"] = c.supermajority_fraction;
  j["candidates"] = c.candidates;
  j["reported_winners"] = c.reported_winners;
  j["cards_upper_bound"] = c.cards_upper_bound;
  j["risk_limit"] = c.risk_limit;
  j["audit_mode"] = to_string(c.mode);
  j["status"] = to_string(c.status);
  return j;
}

Contest contest_from_json(const json& j) {
  Contest c;
  c.id = j.at("id").get<std::string>();
  c.name = get_or<std::string>(j, "name", c.id);
  c.choice = social_choice_from_string(get_or<std::string>(j, "choice_function", "plurality"));
  c.num_winners = get_or<int>(j, "num_winners", 1);
  c.supermajority_fraction = get_or<double>(j, "supermajority_fraction", 0.5);
  c.candidates = j.at("candidates").get<std::vector<std::string>>();
  c.reported_winners = j.at("reported_winners").get<std::vector<std::string>>();
  c.cards_upper_bound = j.at("cards_upper_bound").get<std::int64_t>();
  c.risk_limit = get_or<double>(j, "risk_limit", 0.05);
  c.mode = audit_mode_from_string(get_or<std::string>(j, "audit_mode", "comparison"));
  c.status = contest_status_from_string(get_or<std::string>(j, "status", "active"));
  return c;
}

json to_json(const AuditSpec& s) {
  json j;
  j["seed"] = s.seed;
  if (s.risk_function.kind == EtaConfig::Kind::fixed) {
    j["risk_function"] = {{"type", "alpha_fixed_eta"}, {"eta", s.risk_function.eta}};
  } else {
    j["risk_function"] = {{"type", "alpha_optimal_comparison"}, {"p1", s.risk_function.p1}, {"p2", s.risk_function.p2}};
  }
  j["error_model"] = {{"p1", s.error_model.p1},
                      {"p2", s.error_model.p2},
                      {"placement", s.error_model.placement == ErrorModel::Placement::none ? "none"
                                                                                         : "first_then_equispaced"}};
  if (s.round_strategy.kind == RoundStrategy::Kind::simulation_quantile) {
    j["round_strategy"] = {{"type", "simulation_quantile"},
                           {"quantile", s.round_strategy.quantile},
                           {"replications", s.round_strategy.replications}};
  } else {
    j["round_strategy"] = {{"type", "deterministic_projection"}};
  }
  j["inflation_factor"] = s.inflation_factor;
  if (s.total_cards_upper_bound) j["total_cards_upper_bound"] = *s.total_cards_upper_bound;
  json paths = json::array();
  for (const auto& p : s.cvr_paths) paths.push_back(p.string());
  j["cvrs"] = {{"format", to_string(s.cvr_format)}, {"paths", paths}};
  j["manifest"] = s.manifest_path.string();
  json raire = json::object();
  for (const auto& [contest, path] : s.raire_paths) raire[contest] = path.string();
  j["raire_assertions"] = raire;
  j["api_token"] = s.api_token;
  return j;
}

AuditSpec spec_from_json(const json& j) {
  AuditSpec s;
  s.seed = get_or<std::string>(j, "seed", "");
  if (auto rf = j.find("risk_function"); rf != j.end()) {
    const std::string type = get_or<std::string>(*rf, "type", "alpha_optimal_comparison");
    if (type == "alpha_fixed_eta") {
      s.risk_function.kind = EtaConfig::Kind::fixed;
      s.risk_function.eta = rf->at("eta").get<double>();
    } else if (type == "alpha_optimal_comparison") {
      s.risk_function.p1 = get_or<double>(*rf, "p1", 0.0);
      s.risk_function.p2 = get_or<double>(*rf, "p2", 1e-4);
    } else {
      throw InputError("unknown risk function '" + type + "'");
    }
  }
  if (auto em = j.find("error_model"); em != j.end()) {
    s.error_model.p1 = get_or<double>(*em, "p1", 0.0);
    s.error_model.p2 = get_or<double>(*em, "p2", 0.0);
    const std::string placement = get_or<std::string>(*em, "placement", "first_then_equispaced");
    if (placement == "none") {
      s.error_model.placement = ErrorModel::Placement::none;
    } else if (placement != "first_then_equispaced") {
      throw InputError("unknown error placement '" + placement + "'");
    }
  }
  if (auto rs = j.find("round_strategy"); rs != j.end()) {
    const std::string type = get_or<std::string>(*rs, "type", "deterministic_projection");
    if (type == "simulation_quantile") {
      s.round_strategy.kind = RoundStrategy::Kind::simulation_quantile;
      s.round_strategy.quantile = get_or<double>(*rs, "quantile", 0.8);
      s.round_strategy.replications = get_or<int>(*rs, "replications", 100);
    } else if (type != "deterministic_projection") {
      throw InputError("unknown round strategy '" + type + "'");
    }
  }
  s.inflation_factor = get_or<double>(j, "inflation_factor", 1.0);
  if (auto t = j.find("total_cards_upper_bound"); t != j.end() && !t->is_null())
    s.total_cards_upper_bound = t->get<std::int64_t>();
  if (auto cv = j.find("cvrs"); cv != j.end()) {
    s.cvr_format = cvr_format_from_string(get_or<std::string>(*cv, "format", "canonical"));
    for (const auto& p : cv->at("paths")) s.cvr_paths.emplace_back(p.get<std::string>());
  }
  s.manifest_path = get_or<std::string>(j, "manifest", "");
  if (auto r = j.find("raire_assertions"); r != j.end()) {
    for (const auto& [contest, path] : r->items()) s.raire_paths[contest] = path.get<std::string>();
  }
  s.api_token = get_or<std::string>(j, "api_token", "");
  return s;
}

AuditConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  AuditConfig config;
  try {
    if (!doc.is_object()) throw InputError("configuration must be a JSON object");
    config.spec = spec_from_json(doc);
    for (auto& p : config.spec.cvr_paths) p = resolve(base_dir, p.string());
    if (!config.spec.manifest_path.empty())
      config.spec.manifest_path = resolve(base_dir, config.spec.manifest_path.string());
    for (auto& [contest, path] : config.spec.raire_paths) path = resolve(base_dir, path.string());

    const double default_risk = get_or<double>(doc, "risk_limit", 0.05);
    std::set<std::string> ids;
    for (const auto& cj : doc.at("contests")) {
      json with_default = cj;
      if (!with_default.contains("risk_limit")) with_default["risk_limit"] = default_risk;
      Contest c = contest_from_json(with_default);
      c.status = ContestStatus::active;
      c.validate();
      if (!ids.insert(c.id).second) throw InputError("duplicate contest id " + c.id);
      if (auto r = cj.find("raire_assertions"); r != cj.end())
        config.spec.raire_paths[c.id] = resolve(base_dir, r->get<std::string>());
      config.contests.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("configuration: ") + e.what());
  }
  if (config.contests.empty()) throw InputError("configuration lists no contests");
  config.spec.validate();
  return config;
}

AuditConfig load_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": invalid JSON: " + e.what());
  } catch (const ParseError& e) {
    throw InputError(e.what());
  }
  return parse_config(doc, path.parent_path());
}

}  // namespace rla
