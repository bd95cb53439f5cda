#pragma once

#include <iosfwd>

namespace nsamc {

/// Runs the `nsamc` command line. Returns 0 on success, 1 on a runtime error
/// and 2 on a usage error. Messages go to `out` and `err`.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nsamc
