#pragma once

#include <cstddef>
#include <vector>

#include "gmclab/errors.hpp"

namespace gmclab {

// Uniform grid on [0, T] with nodes t_i = i * T / (n_points - 1).  The
// measure and the solvers work on the n_points - 1 cells [t_i, t_{i+1}].
struct GridSpec {
  double T = 1.0;
  std::size_t n_points = 0;

  void validate() const {
    std::vector<std::string> bad;
    if (!(T > 0.0)) bad.push_back("grid: T must be positive");
    if (n_points < 2) bad.push_back("grid: need at least 2 points");
    if (!bad.empty()) throw validation_error(bad);
  }

  double delta() const { return T / static_cast<double>(n_points - 1); }

  double node(std::size_t i) const { return static_cast<double>(i) * delta(); }

  std::size_t n_cells() const { return n_points - 1; }

  double cell_mid(std::size_t i) const {
    return (static_cast<double>(i) + 0.5) * delta();
  }

  std::vector<double> nodes() const {
    std::vector<double> t(n_points);
    for (std::size_t i = 0; i < n_points; ++i) t[i] = node(i);
    return t;
  }
};

}  // namespace gmclab
