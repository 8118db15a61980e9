#pragma once

#include <iosfwd>

namespace logitforge {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitRuntime = 3 };

// Subcommands: run, shuffle-table, score, partition. Results go to `out`,
// diagnostics to `err`.
int cli_run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace logitforge
