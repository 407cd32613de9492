// Release gate: runs every acceptance criterion and exits nonzero if any fail.
#include <cstdio>
#include <iostream>
#include <vector>

#include "gmclab/acceptance.hpp"

int main() {
  std::vector<gmclab::acceptance::CriterionResult> results =
      gmclab::acceptance::run_suite(std::cout);
  std::size_t failed = 0;
  for (const auto& r : results)
    if (!r.passed) ++failed;
  if (failed == 0) {
    std::printf("all %zu criteria passed\n", results.size());
    return 0;
  }
  std::printf("%zu of %zu criteria failed\n", failed, results.size());
  return 1;
}
