#pragma once

#include <cstdio>
#include <string>

namespace gmclab {

// Decimal form with enough digits to round-trip a double exactly.
inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace gmclab
