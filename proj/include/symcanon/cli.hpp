#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "symcanon/checkpoint.hpp"

namespace symcanon {

// Runs one subcommand. args excludes the program name. Returns the exit code;
// failures print {"error": {...}} on `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const Json& config);

// Replaces "--config FILE" with the file's keys as flags, placed before the
// explicit flags so those take precedence. Keys may use '_' or '-'; a nested
// object named after the subcommand is merged in.
std::vector<std::string> expand_config(const std::vector<std::string>& args);

}  // namespace symcanon
