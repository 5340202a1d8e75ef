#pragma once

#include <string>
#include <vector>

namespace pb {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Condensed invariant suite behind the `verify` CLI subcommand: kernel
// backend equivalence, finite-difference gradient checks, the correlation
// oracle, zero-impact integration, freeze discipline, and the cost-model
// arithmetic.
std::vector<CheckResult> run_verification();

}  // namespace pb
