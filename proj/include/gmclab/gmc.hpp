#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gmclab/covkernel.hpp"
#include "gmclab/errors.hpp"
#include "gmclab/fieldsim.hpp"
#include "gmclab/grid.hpp"

namespace gmclab::gmc {

// Normalized exponential of one field draw: cell i, spanning [t_i, t_{i+1}],
// carries mass exp(beta X(t_i) - beta^2 sigma^2 / 2) * delta.
struct GmcMeasure {
  GridSpec grid;
  double beta = 0.0;
  double eps = 0.0;
  std::vector<double> cell_mass;

  double total() const;

  // Mass of [lo, hi) counting each cell by its left node.
  double window_mass(std::size_t first_cell, std::size_t n_cells) const;
};

GmcMeasure gmc_from_field(const field::FieldSample& sample, std::size_t level,
                          double beta);

struct MomentReport {
  double beta = 0.0;
  double eps = 0.0;
  double p = 0.0;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_replicates = 0;
  std::uint64_t seed = 0;
  bool divergence_warning = false;  // p at or past 2/beta^2

  std::string to_json() const;
};

// Sample p-moment of the total mass with a percentile-bootstrap 95% interval.
MomentReport total_mass_moment(const std::vector<GmcMeasure>& measures, double p,
                               std::uint64_t bootstrap_seed = 1234);

struct HolderFit {
  double eta = 0.0;
  double r_squared = 0.0;
  std::vector<double> log_delta;
  std::vector<double> log_max_mass;  // mean over measures of log max-window mass
};

// Log-log regression of the largest delta-window mass against delta over a
// dyadic range of window widths.
HolderFit holder_modulus_fit(const std::vector<GmcMeasure>& measures);

struct KahaneReport {
  double beta = 0.0;
  double p = 0.0;
  MomentReport coarse;
  MomentReport fine;
  bool ordering_holds = false;  // coarse CI does not sit above the fine CI
};

// Coupled Monte Carlo comparison of a negative total-mass moment at two
// smoothing scales: more smoothing concentrates the mass, so the coarse
// estimate should not exceed the fine one beyond CI slack.
KahaneReport kahane_negative_moment_check(const cov::CovarianceSpec& spec,
                                          const GridSpec& grid, double beta,
                                          double eps_coarse, double eps_fine,
                                          double p, std::size_t replicates,
                                          std::uint64_t seed);

}  // namespace gmclab::gmc
