#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gmclab/errors.hpp"

namespace gmclab::chaos {

// Multi-index over the base Gaussians, stored dense with trailing zeros
// trimmed.  Ordering is graded (degree first, then lexicographic), so map
// iteration visits low degrees first and triangular solves can run in place.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<std::uint8_t> e);
  static MultiIndex unit(std::size_t var);

  std::size_t degree() const;
  std::uint8_t operator[](std::size_t i) const {
    return i < e_.size() ? e_[i] : std::uint8_t{0};
  }
  std::size_t width() const { return e_.size(); }
  const std::vector<std::uint8_t>& exponents() const { return e_; }

  double factorial() const;             // alpha! as a double
  double weight_2n(double t) const;     // prod (2(i+1))^{t * e_i}

  MultiIndex plus(const MultiIndex& o) const;
  bool dominates(const MultiIndex& o) const;  // o <= this componentwise
  MultiIndex minus(const MultiIndex& o) const;

  bool operator==(const MultiIndex& o) const { return e_ == o.e_; }
  bool operator!=(const MultiIndex& o) const { return e_ != o.e_; }
  bool operator<(const MultiIndex& o) const;

 private:
  std::vector<std::uint8_t> e_;
};

// Every multi-index over n_vars variables with total degree <= max_degree,
// in graded order.
std::vector<MultiIndex> all_indices(std::size_t n_vars, std::size_t max_degree);

// Probabilists' Hermite polynomial h_k via the three-term recurrence.
double hermite(int k, double x);

struct ChaosExpansion {
  std::size_t n_vars = 0;
  std::size_t degree_cap = 12;
  std::map<MultiIndex, double> coeffs;
  // Weighted squared mass (alpha! weights) dropped by cap-binding operations,
  // including the losses already carried by the operands.
  double truncation_loss = 0.0;

  static ChaosExpansion constant(std::size_t n_vars, double value,
                                 std::size_t cap = 12);
  static ChaosExpansion variable(std::size_t var, std::size_t n_vars,
                                 std::size_t cap = 12);

  double coeff(const MultiIndex& a) const;
  void set(const MultiIndex& a, double v);
  std::size_t max_degree() const;
  double l2_norm_sq() const;  // sum a_alpha^2 alpha!

  std::string to_json() const;
  static ChaosExpansion from_json(const std::string& text);
};

ChaosExpansion add(const ChaosExpansion& f, const ChaosExpansion& g);
ChaosExpansion scale(const ChaosExpansion& f, double s);

// Coefficient of H_gamma is sum over alpha+beta=gamma of a_alpha b_beta.
// Degrees add under the Wick product, so truncation at an intermediate cap
// never perturbs the coefficients that are kept.
ChaosExpansion wick_mul(const ChaosExpansion& f, const ChaosExpansion& g,
                        std::size_t cap = 12);

// Test point h = lambda * sum c_i xi_i.
struct GaussianPoint {
  std::vector<double> coeffs;
  double lambda = 1.0;

  double var() const;                  // E[(lambda h)^2]
  std::vector<double> loaded() const;  // lambda * c
};

// e^{wick h} = sum_n (lambda h)^{wick n} / n!; coefficient of H_alpha is
// prod b_i^{alpha_i} / alpha_i! with b = lambda c.
ChaosExpansion wick_exp(const GaussianPoint& h, std::size_t cap = 12);

struct WickInverseResult {
  ChaosExpansion inverse;
  // Geometric growth of plain squared-coefficient degree blocks; > 1 means
  // the series cannot converge in L^2 (a_0-normalized Gaussian case: ratio
  // alpha^2, matching divergence at |alpha| >= 1).
  double l2_block_growth = 0.0;
  bool l2_divergent = false;
  // Same growth under (S)_{-1,-q} weights (2N)^{-q alpha} for q = 2, 4, 8.
  std::array<double, 3> snorm_block_growth{};
  bool norm_divergent = false;  // grows for every tested q
};

WickInverseResult wick_inverse(const ChaosExpansion& f, std::size_t cap = 12);

// Exact evaluation of E[F e^{wick h}] = sum a_alpha prod (lambda c_i)^{alpha_i}.
double s_transform(const ChaosExpansion& f, const GaussianPoint& pt);

// Truncated sum a_alpha^2 (alpha!)^{1+rho} (2N)^{r alpha}; r < 0 weights the
// distribution-space scale, r > 0 the test-function scale.
double hida_norm(const ChaosExpansion& f, double rho, double r);

double evaluate(const ChaosExpansion& f, const std::vector<double>& xi);

}  // namespace gmclab::chaos
