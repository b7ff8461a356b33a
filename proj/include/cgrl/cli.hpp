#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cgrl {

/// Entry point of the `cgrl` tool; args excludes the program name. Failures
/// print one line "error: <code>: <message>" to `err` and return nonzero.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cgrl
