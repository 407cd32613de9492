#pragma once

#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmclab {

// Configuration / precondition failures.  Carries every violation found so a
// bad config is reported in one pass.
class validation_error : public std::invalid_argument {
 public:
  explicit validation_error(std::vector<std::string> violations)
      : std::invalid_argument(join(violations)), violations_(std::move(violations)) {}

  explicit validation_error(const std::string& one)
      : validation_error(std::vector<std::string>{one}) {}

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out.empty() ? std::string("validation failed") : out;
  }
  std::vector<std::string> violations_;
};

// Numerical breakdowns (factorization failure, divergent series, ill
// conditioning) that survive validation.
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failures while persisting artifacts.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gmclab
