#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace recon::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct Check {
  std::string name;
  std::string description;
  bool heavy = false;  // skipped by `recon verify` unless selected by --filter
  std::function<CheckResult()> run;
};

/// Identity, recovery, gradient and determinism checks, in a fixed order.
const std::vector<Check>& all_checks();

/// Runs every check whose name contains `filter` (all light checks when the
/// filter is empty, plus heavy ones when `include_heavy`). Prints one
/// PASS/FAIL line per check to `out`.
std::vector<CheckResult> run_checks(const std::string& filter, bool include_heavy, std::ostream& out);

}  // namespace recon::verify
