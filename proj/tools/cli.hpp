#pragma once

#include <iosfwd>

namespace qamc::tools {

// Entry point of the qamc command; returns the process exit code
// (0 success, 1 runtime failure, 2 usage error).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qamc::tools
