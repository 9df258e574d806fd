#pragma once

#include <iosfwd>

namespace rla {

/// Exit codes: 0 success, 1 runtime error or bad flags, 2 validation failure,
/// 3 fatal consistency stop.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rla
