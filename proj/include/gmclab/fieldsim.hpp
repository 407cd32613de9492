#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "gmclab/covkernel.hpp"
#include "gmclab/errors.hpp"
#include "gmclab/grid.hpp"

namespace gmclab::field {

// One joint draw of the smoothed field at every (level, grid point) pair.
struct FieldSample {
  GridSpec grid;
  std::vector<double> eps_levels;
  std::vector<std::vector<double>> values;  // [level][point]
  std::vector<double> sigma2;               // field variance per level
  std::uint64_t seed = 0;                   // per-replicate stream seed
  std::uint64_t replicate = 0;
  double jitter_used = 0.0;
};

// Exact block covariance over all (level, point) pairs.  The smoothed kernel
// is translation invariant, so every (level a, level b) block is Toeplitz and
// costs n_points kernel evaluations instead of n_points^2.
Eigen::MatrixXd build_joint_covariance(const GridSpec& grid,
                                       const std::vector<double>& eps_levels,
                                       const cov::CovarianceSpec& spec,
                                       std::size_t dim_cap = 8192);

struct FactorResult {
  Eigen::MatrixXd chol_lower;
  double jitter_used = 0.0;
};

// Cholesky with a jitter ladder {0, 1e-12, 1e-10, 1e-8}: the smallest rung
// that restores factorability wins.  Throws numerical_error carrying a
// most-negative-eigenvalue estimate when the ladder is exhausted.
FactorResult factor_spd(Eigen::MatrixXd m);

// Prepared sampler: covariance and factorization happen once; a draw depends
// only on (master_seed, replicate), so any partition of the replicate range
// across workers reproduces identical bits.
class FieldSampler {
 public:
  FieldSampler(const GridSpec& grid, std::vector<double> eps_levels,
               const cov::CovarianceSpec& spec, std::size_t dim_cap = 8192);

  FieldSample draw(std::uint64_t master_seed, std::uint64_t replicate) const;

  const GridSpec& grid() const { return grid_; }
  const std::vector<double>& eps_levels() const { return eps_levels_; }
  const std::vector<double>& sigma2() const { return sigma2_; }
  double jitter_used() const { return factor_.jitter_used; }

 private:
  GridSpec grid_;
  std::vector<double> eps_levels_;
  std::vector<double> sigma2_;
  FactorResult factor_;
};

std::vector<FieldSample> sample_fields(const GridSpec& grid,
                                       const std::vector<double>& eps_levels,
                                       const cov::CovarianceSpec& spec,
                                       std::uint64_t seed, std::size_t count);

// Columnar text: one header row naming the grid, one row per (replicate, level).
void write_fields_csv(std::ostream& os, const std::vector<FieldSample>& batch);

}  // namespace gmclab::field
