#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gmclab/covkernel.hpp"
#include "gmclab/grid.hpp"
#include "gmclab/pressure1d.hpp"

namespace gmclab::projection {

// Deterministic transported solutions u~_z(t), one per collocation point z
// (the cell midpoints of z_grid), built from the closed form
//   u~_z(t) = u~_z(0) + A(z) (G_{bb'} I_{[0,t]})(z) + (G_{bb'}[F I_{[0,t]}])(z)
// with the potential integrals taken against the exact power kernel and F
// frozen at t-cell midpoints.  recover_kernel fills phi by inverting the
// potential operator at beta'^2 per time node.
struct ProjectedSolution {
  double beta = 0.5;
  double beta_prime = 0.5;
  GridSpec z_grid;  // collocation lives on this grid's cell midpoints
  GridSpec t_grid;  // solution sampled on this grid's nodes
  pressure::BoundaryData bc;
  std::vector<std::vector<double>> u_tilde;       // [z midpoint][t node]
  std::vector<std::vector<double>> phi;           // [t node][z midpoint]
  std::vector<double> phi_dual_norm;              // order -(1-beta'^2)/2, per t
};

// phi_{b'} with G_{b'^2} phi_{b'} = G_{bb'} phi, on the midpoints of grid.
std::vector<double> project_kernel(const std::vector<double>& phi, double beta,
                                   double beta_prime, const GridSpec& grid,
                                   const cov::CovarianceSpec& spec);

ProjectedSolution solve_projected_bvp(double beta, double beta_prime,
                                      const cov::CovarianceSpec& spec,
                                      const pressure::ForcingSpec& forcing,
                                      const pressure::BoundaryData& bc,
                                      const GridSpec& z_grid, const GridSpec& t_grid);

// Finite-volume residual of -(e^{-bb' R(z,.)} u~') ' = f at interior t
// nodes, with harmonic cell weights delta / int_cell e^{bb' R(z,s)} ds that
// stay finite through the kernel singularity t = z.
pressure::ResidualReport projected_residual(const ProjectedSolution& sol,
                                            const cov::CovarianceSpec& spec,
                                            const pressure::ForcingSpec& forcing,
                                            std::size_t z_index);

struct RecoveryReport {
  double max_residual = 0.0;  // worst |G phi - u~| over time nodes
  double condition_estimate = 0.0;
  bool regularized = false;
};

RecoveryReport recover_kernel(ProjectedSolution& sol, const cov::CovarianceSpec& spec);

struct McCheckReport {
  std::vector<double> mc_value;   // E[ (int phi dmu)(int psi dmu) ] per test psi
  std::vector<double> det_value;  // int psi(z) u~_z(t) dz
  std::vector<double> std_error;
  double max_abs_discrepancy = 0.0;
  double max_se_units = 0.0;  // worst |mc - det| / SE
  double t = 0.0;
  double eps = 0.0;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  std::string to_json() const;
};

// Couples the recovered kernel back to the measure: Monte Carlo moments of
// int phi(t,.) dmu_{b'} against the deterministic pairing with u~ at the time
// node closest to T/2, over the first 8 cosine test functions.
McCheckReport projected_mc_check(const ProjectedSolution& sol,
                                 const cov::CovarianceSpec& spec,
                                 std::size_t replicates, double eps,
                                 std::uint64_t seed);

void write_u_tilde_csv(std::ostream& os, const ProjectedSolution& sol);
void write_phi_csv(std::ostream& os, const ProjectedSolution& sol);
std::string manifest_json(const ProjectedSolution& sol);

}  // namespace gmclab::projection
