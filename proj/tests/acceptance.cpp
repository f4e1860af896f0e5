// One line per acceptance criterion, in order. Exit status is nonzero when
// any criterion fails.
#include "recon/verify.hpp"

#include <iostream>
#include <sstream>

int main() {
  const char* order[] = {"fd_mmd_identity", "nonbayes_mmd_identity", "sfd_fd_agreement", "ibp_constant",
                         "gaussian_recovery", "kidscore_recovery", "gradient_check", "norm_growth", "determinism"};
  int failed = 0;
  int n = 0;
  for (const char* name : order) {
    ++n;
    for (const auto& c : recon::verify::all_checks()) {
      if (c.name != name) continue;
      recon::verify::CheckResult r;
      try {
        r = c.run();
      } catch (const std::exception& e) {
        r.detail = std::string("exception: ") + e.what();
      }
      std::cout << "criterion " << n << " " << (r.passed ? "PASS" : "FAIL") << " " << c.name << ": " << r.detail
                << std::endl;
      failed += r.passed ? 0 : 1;
    }
  }
  std::cout << (9 - failed) << "/9 criteria passed" << std::endl;
  return failed ? 1 : 0;
}
