#pragma once

#include <iosfwd>

namespace toploc::cli {

/// Runs one subcommand. Returns 0 on success, 1 on data errors, 2 on usage errors.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace toploc::cli
