#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "gmclab/covkernel.hpp"
#include "gmclab/grid.hpp"

namespace gmclab::potential {

// Dense collocation discretization of the potential operator with kernel
// |z - y|^{-alpha} e^{alpha h(z - y)}.  Collocation points are the cell
// midpoints of the grid; entry (i, j) integrates the kernel exactly over
// cell j (including the singular cell i = j) with e^{alpha h} frozen at the
// midpoint pair, then the matrix is symmetrized.  Entries carry the dy cell
// weights, so apply() maps midpoint samples of phi to midpoint samples of
// G phi.
struct PotentialOperator {
  double alpha = 0.5;
  GridSpec grid;
  Eigen::MatrixXd matrix;
  double condition_estimate = 0.0;
  double min_eigenvalue = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }
  std::vector<double> nodes() const;  // the collocation midpoints
  std::vector<double> apply(const std::vector<double>& phi) const;
};

PotentialOperator build_G(double alpha, const GridSpec& grid,
                          const cov::CovarianceSpec& spec);

// int_0^t |z - y|^{-alpha} dy for the plain log kernel (h = 0), evaluated
// from the antiderivative: (z^{1-a} + (t-z)^{1-a})/(1-a) for z inside [0, t]
// and (z^{1-a} - (z-t)^{1-a})/(1-a) beyond it.
double riesz_indicator_exact(double alpha, double t, double z, double T);

struct InvertReport {
  std::vector<double> solution;
  double residual_norm = 0.0;  // |G x - rhs|_2 after the solve
  double condition_estimate = 0.0;
  bool regularized = false;  // eigenvalue floor applied (reported, never silent)
};

InvertReport invert_G(const PotentialOperator& op, const std::vector<double>& rhs);

// W^{s,2} norm of the piecewise-linear interpolant of uniform samples.
// s in (0,1): L2 part plus the Gagliardo double integral, with exact pair
// weights for separated cells and exact piecewise-linear integrals on the
// self/adjacent band.  s = 0: plain L2 norm.  s in (-1,0): dual norm, the
// supremum of <f, psi>/|psi|_{|s|} over the first 64 cosine modes of the
// sample interval.
double sobolev_norm(const std::vector<double>& f, double spacing, double s);

struct C0Report {
  double c0 = 0.0;  // minimum Rayleigh quotient <psi, G psi> / dual-norm^2
  bool violated = false;
  std::vector<double> witness;  // midpoint samples of the minimizing psi
  double quotient_at_witness = 0.0;
};

// Coercivity estimate of G_{beta^2} against the dual Sobolev norm of order
// -(1 - beta^2)/2, minimized over the cosine dictionary plus 200 seeded
// random smooth test functions.  A negative quadratic form marks the spec
// degenerate and reports the witness.
C0Report nondegeneracy_check(const cov::CovarianceSpec& spec, double beta,
                             const GridSpec& grid);

// One JSON header line (alpha, grid, spec hash), then one text row per
// matrix row.
void write_potential_operator(std::ostream& os, const PotentialOperator& op,
                              const cov::CovarianceSpec& spec);

}  // namespace gmclab::potential
