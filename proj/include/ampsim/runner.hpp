#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ampsim::cli {

inline constexpr const char* kToolVersion = "amp-sim 0.1.0";

// Executes one command-line invocation (args excludes the program name) and
// returns the process exit code: 0 success, 1 data/validation error, 2 usage
// error. All file side effects go through the --out directory plus a
// manifest.json describing the run. Runs in-process so tests can drive the
// full binary surface without spawning.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ampsim::cli
