#pragma once

namespace randomlab {

// Full command-line front end; returns the process exit code
// (0 ok, 1 runtime failure, 2 usage error).
int run_cli(int argc, const char* const* argv);

}  // namespace randomlab
