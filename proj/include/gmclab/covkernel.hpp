#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "gmclab/errors.hpp"
#include "gmclab/interp.hpp"

namespace gmclab::cov {

enum class MollifierFamily { BumpSelfConvolution, TruncatedGaussian };

// Smooth probability density on [-1,1]; rescaled to theta_eps(u) = theta(u/eps)/eps
// when smoothing the field.  Both families are (numerically) positive definite:
// the self-convolved bump exactly, the truncated Gaussian up to its tail cutoff.
class Mollifier {
 public:
  static Mollifier bump_selfconvolution();
  static Mollifier truncated_gaussian(double sigma = 0.2);

  MollifierFamily family() const { return family_; }
  double sigma() const { return sigma_; }
  std::string name() const;

  double density(double u) const;

  // \int density computed by composite quadrature (should be 1 to 1e-10).
  double integral() const;

  // min/max ratio of the sampled cosine spectrum; negative values beyond a
  // small tolerance mean the family is not usable as a covariance smoother.
  double min_spectrum_ratio() const;

  void validate() const;

 private:
  Mollifier() = default;
  MollifierFamily family_ = MollifierFamily::BumpSelfConvolution;
  double sigma_ = 0.2;
  double norm_ = 1.0;
  std::shared_ptr<const interp::CubicSpline> table_;  // bump family only
};

// Even smooth perturbation h added to the log kernel, tabulated on a uniform
// grid over [-radius, radius] and zero outside.  Tables are symmetrized on
// construction so evenness holds exactly.
class HTable {
 public:
  HTable() = default;  // identically zero

  static HTable from_table(double radius, std::vector<double> values);

  bool is_zero() const { return zero_; }
  double radius() const { return radius_; }
  const std::vector<double>& values() const { return values_; }

  double operator()(double u) const;

 private:
  bool zero_ = true;
  double radius_ = 0.0;
  std::vector<double> values_;
  std::shared_ptr<const interp::CubicSpline> spline_;
};

struct CovarianceSpec {
  double T = 1.0;
  double beta = 0.5;
  Mollifier mollifier = Mollifier::bump_selfconvolution();
  HTable h;

  void validate() const;

  // Human-readable key-value serialization; numbers are printed with enough
  // digits to round-trip exactly.
  std::string to_text() const;
  static CovarianceSpec from_text(const std::string& text);
};

// R(x,y) = log(1/|x-y|) + h(x-y) on [0,T]^2; +infinity on the diagonal.
double cov_exact(const CovarianceSpec& spec, double x, double y);

struct CovValue {
  double value = 0.0;
  double error_estimate = 0.0;
};

// Covariance of the smoothed field at scales (eps1, eps2).  Reduces the
// double convolution to one singular integral against the difference density
// q = theta_eps1 * theta_eps2, which is cached per scale pair.
class CovEvaluator {
 public:
  explicit CovEvaluator(CovarianceSpec spec, double tol = 1e-10);

  CovValue cov(double x, double y, double eps1, double eps2) const;
  double variance(double eps) const;

  const CovarianceSpec& spec() const { return spec_; }

 private:
  struct QTable {
    double half = 0.0;
    interp::CubicSpline q;
  };
  const QTable& q_table(double e1, double e2) const;

  CovarianceSpec spec_;
  double tol_;
  mutable std::map<std::pair<double, double>, QTable> cache_;
  mutable std::mutex mu_;
};

CovValue cov_mollified(const CovarianceSpec& spec, double x, double y, double eps1,
                       double eps2);
double var_mollified(const CovarianceSpec& spec, double eps);

// Construction of an h that makes the windowed log kernel a covariance: a
// positive frequency bump lifts the negative dip of the windowed-log spectrum,
// and h is the inverse transform of that bump, tapered back to compact
// support.  The reported margin is recomputed from the final tabulated h.
struct NondegenerateBuild {
  HTable h;
  double spectral_margin = 0.0;     // min over the frequency grid, after lift
  double raw_margin = 0.0;          // min before the lift (the r = 0 candidate)
  double bump_amplitude = 0.0;
  double bump_width = 0.0;
  double cutoff_radius = 0.0;       // psi0 is 1 inside 4*r_cut
  int grid_points = 0;
};

NondegenerateBuild build_nondegenerate_h(double T, double r_cut, int grid_log2 = 12);

}  // namespace gmclab::cov
