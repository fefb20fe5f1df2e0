#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace riskdep::cli {

constexpr const char* kVersion = "0.1.0";

// Exit codes.
constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kIo = 3;
constexpr int kNumerical = 4;

// Runs one command; `args` excludes the program name. Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace riskdep::cli
