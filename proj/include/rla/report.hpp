#pragma once

// Audit reports: a structured document plus table and delimiter-separated renderings.

#include <optional>
#include <string>

#include "json.hpp"
#include "rla/engine.hpp"

namespace rla {

/// Per-contest sizes, margins, outcomes and assertion p-values. With a
/// threshold, also totals over the contests whose margin exceeds it.
nlohmann::json build_report(const AuditState& state, std::optional<double> recount_threshold = std::nullopt);

std::string report_structured(const AuditState& state, std::optional<double> recount_threshold = std::nullopt);
std::string report_table(const AuditState& state, std::optional<double> recount_threshold = std::nullopt);
std::string report_csv(const AuditState& state, std::optional<double> recount_threshold = std::nullopt);

/// Smallest assertion margin of the contest (the diluted margin).
double contest_margin(const AuditState& state, const std::string& contest_id);

}  // namespace rla
