#pragma once

namespace elm::cli {

// Parses argv, runs one subcommand and returns the process exit code:
// 0 success, 1 usage or validation error, 2 runtime failure.
int run_cli(int argc, const char* const* argv);

}  // namespace elm::cli
