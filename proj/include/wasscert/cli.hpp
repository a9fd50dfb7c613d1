#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wasscert {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitNumerical = 2 };

/// Entry point behind the `wasscert` binary. args excludes the program name.
/// Prints one JSON summary line to out on success; diagnostics go to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wasscert
