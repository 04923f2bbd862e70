#pragma once

#include <string>
#include <vector>

namespace hazardbench {

// Runs one CLI invocation (arguments exclude the program name) and returns
// the process exit code: 0 success, 1 validation/usage error, 2 numerical
// failure.  Exposed as a function so tests can drive the tool in-process.
int run_cli(const std::vector<std::string>& args);

}  // namespace hazardbench
