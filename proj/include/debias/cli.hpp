#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace debias {

inline constexpr const char* kToolName = "debias-forge";

// Runs one debias-forge invocation (args excludes the program name) and
// returns the process exit code. Diagnostics go to err, --help text to out.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

const char* tool_version();

}  // namespace debias
