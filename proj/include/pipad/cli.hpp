#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pipad::cli {

/// Default output root when a command gets no --out.
inline constexpr const char* kOutputRootEnv = "PIPAD_OUTPUT_ROOT";

/// Runs one command line (without the program name) and returns the exit
/// code: 0 success, 2 usage, 3 data validation, 4 capacity or hard errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pipad::cli
