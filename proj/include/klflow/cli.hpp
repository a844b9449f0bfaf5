#pragma once

#include <string>
#include <vector>

namespace klflow {

// argv-style entry point (program name excluded). Returns the process exit
// code: 0 success, 1 configuration or capability problems, 2 execution or
// analysis failures. Kept in the library so tests can drive the CLI
// in-process.
int run_cli(const std::vector<std::string>& args);

}  // namespace klflow
