#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace rla {

/// Splits one line of comma-separated text; double quotes protect commas and
/// a doubled quote is a literal quote. Throws std::invalid_argument on an
/// unterminated quote.
std::vector<std::string> split_csv_line(std::string_view line);

/// Quotes a field when it contains a comma, quote or newline.
std::string csv_field(std::string_view value);

}  // namespace rla
