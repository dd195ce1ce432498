#pragma once

#include <iosfwd>

namespace overfit::cli {

// Exit codes: 0 success, 1 validation error, 2 numerical failure,
// 3 mc-check completed with at least one failed comparison.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace overfit::cli
