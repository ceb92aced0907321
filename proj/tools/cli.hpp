#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace outage::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// Runs one subcommand (synth, model, detect, eval, coverage). args excludes
// the program name. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace outage::cli
