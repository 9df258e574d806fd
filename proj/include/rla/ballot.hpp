#pragma once

#include <string>
#include <vector>

#include "rla/model.hpp"

namespace rla {

/// Candidates receiving a valid vote. A mark set with more than `allowed`
/// marks is an overvote and yields no valid votes; an empty set is an undervote.
std::vector<std::string> plurality_votes(const Marks& marks, int allowed);

/// Candidates in preference order. Ranking stops at the first rank shared by
/// two candidates.
std::vector<std::string> ranked_preferences(const Marks& marks);

}  // namespace rla
