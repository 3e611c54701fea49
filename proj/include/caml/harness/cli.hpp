#pragma once

#include <string>
#include <vector>

namespace caml::harness {

/// Parses and runs one CLI invocation. Returns the process exit code:
/// 0 success, 2 validation/usage error, 1 runtime error.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

}  // namespace caml::harness
