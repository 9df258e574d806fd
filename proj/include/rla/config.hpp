#pragma once

// Audit configuration file (JSON); the schema is described in README.md.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "rla/ingest.hpp"
#include "rla/model.hpp"
#include "rla/risk.hpp"

namespace rla {

struct RoundStrategy {
  enum class Kind { deterministic_projection, simulation_quantile };
  Kind kind = Kind::deterministic_projection;
  double quantile = 0.8;
  int replications = 100;
};

struct AuditSpec {
  std::string seed;  ///< may be empty until the seed ceremony
  EtaConfig risk_function;
  /// Error rates injected into projections for the initial sample size.
  ErrorModel error_model;
  RoundStrategy round_strategy;
  double inflation_factor = 1.0;
  std::optional<std::int64_t> total_cards_upper_bound;

  CvrFormat cvr_format = CvrFormat::canonical;
  std::vector<std::filesystem::path> cvr_paths;
  std::filesystem::path manifest_path;
  /// Contest id -> RAIRE assertion file, for IRV contests.
  std::map<std::string, std::filesystem::path> raire_paths;
  std::string api_token;

  void validate() const;
};

struct AuditConfig {
  AuditSpec spec;
  std::vector<Contest> contests;
};

/// Parses a configuration document. Relative paths resolve against `base_dir`.
AuditConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
AuditConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const Contest& contest);
Contest contest_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AuditSpec& spec);
AuditSpec spec_from_json(const nlohmann::json& j);

}  // namespace rla
