#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gmclab/chaos.hpp"
#include "gmclab/covkernel.hpp"
#include "gmclab/errors.hpp"
#include "gmclab/fieldsim.hpp"
#include "gmclab/gmc.hpp"
#include "gmclab/grid.hpp"

namespace gmclab::pressure {

// Forcing f on [0,T] with its exact cumulative F(t) = -int_0^t f.
struct ForcingSpec {
  enum class Family { zero, constant, sine, piecewise };

  Family family = Family::zero;
  double T = 1.0;
  double amplitude = 0.0;  // constant value, or sine amplitude
  int cycles = 1;          // whole sine periods over [0,T]
  double phase = 0.0;      // sine phase offset in radians
  std::vector<double> breaks;  // piecewise cell edges, breaks.front()=0, back()=T
  std::vector<double> pieces;  // piecewise values, one per cell

  static ForcingSpec zero(double T);
  static ForcingSpec constant(double value, double T);
  static ForcingSpec sine(double amplitude, int cycles, double T, double phase = 0.0);
  static ForcingSpec piecewise(std::vector<double> breaks, std::vector<double> pieces);

  void validate() const;
  double f(double t) const;
  double F(double t) const;     // exact antiderivative, F(0) = 0
  double integral() const;      // int_0^T f
  double total_abs() const;     // int_0^T |f|
  double sup_abs_F() const;     // sup_t |F(t)|, bounded by total_abs()
};

enum class BcKind { ivp, dirichlet, neumann, periodic };

struct BoundaryData {
  BcKind kind = BcKind::ivp;
  double u1 = 0.0;
  double u2 = 0.0;
};

struct SolutionPath {
  GridSpec grid;
  double beta = 0.0;
  double eps = 0.0;
  BoundaryData bc;
  double kappa = 0.0;
  std::vector<double> values;  // at grid nodes

  double total_variation() const;
};

// U(t_i) by cumulative sums of (kappa + F(cell midpoint)) * cell_mass with
// kappa fixed by the boundary data.
SolutionPath solve_pathwise(const gmc::GmcMeasure& mu, const ForcingSpec& forcing,
                            const BoundaryData& bc);

struct ResidualReport {
  double max_abs = 0.0;
  double rms = 0.0;
  std::size_t n_interior = 0;
};

// Discrete residual of the smoothed equation the path solves:
// r_i = -e^{beta^2 s2} D[exp(-beta X - beta^2 s2 / 2) D[U]](t_i) - f(t_i)
// with centered differences and s2 the level variance.
ResidualReport verify_pathwise_ode(const SolutionPath& u,
                                   const field::FieldSample& sample,
                                   std::size_t level, const ForcingSpec& forcing);

// Fitted decay order of max residual against grid spacing.
double residual_decay_order(const std::vector<double>& deltas,
                            const std::vector<double>& max_residuals);

// Deterministic solve with weight e^{c(y)} dy, c tabulated at the nodes:
// u(t) = u(0) + int_0^t e^{c(y)} (kappa + F(y)) dy, discretized exactly like
// the pathwise solver (left-node weights, midpoint forcing) so S-transform
// identities hold at the coefficient level rather than up to O(delta).
std::vector<double> solve_s_side(const GridSpec& grid,
                                 const std::vector<double>& c_profile,
                                 const ForcingSpec& forcing, const BoundaryData& bc,
                                 double* kappa_out = nullptr);

// Mollified field on a grid written over n orthonormal base Gaussians:
// X(t_i) = sum_j loadings[i][j] xi_j, from the spectral factorization of the
// node covariance restricted to the leading directions.
struct ChaosField {
  GridSpec grid;
  double beta = 0.0;
  double eps = 0.0;
  std::size_t n_vars = 0;
  std::vector<std::vector<double>> loadings;  // [node][variable]
  double discarded_variance = 0.0;            // trace fraction dropped
  std::vector<double> sigma2;                 // kept variance per node
};

// n_vars = 0 picks the smallest n <= 6 whose discarded trace fraction is
// <= 5%; an explicit n_vars just reports the fraction.
ChaosField chaos_field_from_covariance(const GridSpec& grid,
                                       const cov::CovarianceSpec& spec, double eps,
                                       std::size_t n_vars = 0);

struct ChaosSolution {
  GridSpec grid;
  double beta = 0.0;
  double eps = 0.0;
  BoundaryData bc;
  chaos::ChaosExpansion kappa;
  std::vector<chaos::ChaosExpansion> values;
};

ChaosSolution solve_wick_chaos(const ChaosField& field, const ForcingSpec& forcing,
                               const BoundaryData& bc, std::size_t cap = 8);

struct ConvergenceReport {
  std::vector<double> eps;     // schedule, coarse to fine
  std::vector<double> ky_fan;  // one per consecutive pair
  bool monotone = false;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  std::string to_json() const;
};

// Couples consecutive smoothing levels through one joint draw per replicate
// and measures sup-norm distances of the pathwise solutions.
ConvergenceReport convergence_study(const cov::CovarianceSpec& spec,
                                    const GridSpec& grid,
                                    std::vector<double> eps_schedule,
                                    const ForcingSpec& forcing,
                                    const BoundaryData& bc, std::size_t replicates,
                                    std::uint64_t seed);

void write_solution_csv(std::ostream& os, const SolutionPath& u);
void write_chaos_solution_json(std::ostream& os, const ChaosSolution& u);

}  // namespace gmclab::pressure
