#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gmclab::acceptance {

struct CriterionResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Runs every release criterion in order, streaming one PASS/FAIL line per
// criterion to `lines` as it completes.  All randomness is internally seeded,
// so two runs produce identical results.
std::vector<CriterionResult> run_suite(std::ostream& lines);

}  // namespace gmclab::acceptance
