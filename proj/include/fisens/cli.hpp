#pragma once

#include <iosfwd>

namespace fisens::cli {

/// Runs one `fisens` subcommand. Returns 0 on success, 1 on validation or
/// runtime failures and 2 on usage errors.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fisens::cli
