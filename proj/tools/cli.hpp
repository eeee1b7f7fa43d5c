#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace selpred::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitConfigError = 2;

/// Runs one command line. args excludes the program name.
/// Returns the process exit code; never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace selpred::cli
