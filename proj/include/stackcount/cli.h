#pragma once

namespace stackcount {

// Entry point for the `stackcount` tool. Returns a process exit code:
// 0 success, 2 bad configuration/usage, 3 generation failure, 4 missing
// input, 5 numeric failure.
int run_cli(int argc, char** argv);

}  // namespace stackcount
