#pragma once

#include <iosfwd>

namespace dynot::cli {

/// Exit codes: 0 success, 1 error (or failed gradient check), 2 geodesic
/// stopped without converging. Errors print `error code=<Code> [slice=<t>]`
/// on their first line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dynot::cli
