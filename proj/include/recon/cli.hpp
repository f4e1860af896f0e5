#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace recon::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitConfigError = 2;

/// sample | attack | verify | report. Returns the process exit code.
int run_command(int argc, char** argv);
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace recon::cli
