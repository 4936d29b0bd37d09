#ifndef ETK_CLI_HPP
#define ETK_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace etk {

enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitTolerance = 2 };

/// Entry point of the `etk` tool. `args` excludes the program name. The
/// result JSON goes to `out` unless --out is given; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace etk

#endif
