#pragma once

// Numerical self-check suite shared by the `check` subcommand and the
// acceptance test binary.

#include <cstdint>
#include <string>
#include <vector>

namespace affinebody {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double limit_seconds = 0.0;
};

/// Number of checks in the suite; ids run from 1 to check_count().
int check_count();

/// Runs one check.  A check passes only if all of its properties hold and it
/// finishes within its time limit.  Exceptions are reported as failures.
CheckResult run_check(int id, std::uint64_t seed);

std::vector<CheckResult> run_checks(std::uint64_t seed);

/// One line per result: "[PASS] 3 conservation (1.2 s / 30 s): detail".
std::string format_result(const CheckResult& r);

}  // namespace affinebody
