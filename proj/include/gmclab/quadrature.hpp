#pragma once

#include <functional>
#include <vector>

namespace gmclab::quad {

struct GaussRule {
  std::vector<double> x;
  std::vector<double> w;
};

// Gauss-Legendre rule on [-1,1], computed once per order and cached.
const GaussRule& gauss_legendre(int n);

// Gauss rule for the standard normal weight (probabilists' convention),
// total weight 1.  Exact for polynomials of degree 2n-1 against N(0,1).
GaussRule gauss_hermite(int n);

// Fixed-order Gauss-Legendre on [a,b].
double integrate(const std::function<double(double)>& f, double a, double b, int order = 16);

// Composite Gauss with interval doubling until the change is below tol.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double tol, double* error_estimate = nullptr);

// Exact moments M_j = \int_{t0}^{t1} u^j log|u - c| du for j = 0..max_j.
// Valid for any c, including c inside [t0, t1] (the singularity is integrable).
void log_moments(double c, double t0, double t1, int max_j, double* out);

// Exact \int_a^b |z - y|^{-alpha} dy for alpha in [0,1).
double power_cell_integral(double z, double a, double b, double alpha);

// Exact \iint_{[a0,a1] x [b0,b1]} |x - y|^{-1-2s} dy dx for cells with
// b0 >= a1 (pass cells left-to-right).  Diverges for touching cells when
// s >= 1/2; the caller owns that case.
double gagliardo_pair_weight(double a0, double a1, double b0, double b1, double s);

struct SingularIntegral {
  double value = 0.0;
  double error_estimate = 0.0;
};

// \int_lo^hi g(w) log(1/|w - d|) dw.  Cells near w = d use product
// integration: g is interpolated by a Chebyshev-node polynomial and the
// polynomial-times-log moment integrals are evaluated from their exact
// antiderivatives.  Cells away from d use plain Gauss.
SingularIntegral integrate_against_log(const std::function<double(double)>& g,
                                       double lo, double hi, double d, double tol);

}  // namespace gmclab::quad
