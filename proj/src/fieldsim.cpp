#include "gmclab/fieldsim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <utility>

#include "gmclab/rng.hpp"
#include "gmclab/textio.hpp"

namespace gmclab::field {

namespace {

void validate_inputs(const GridSpec& grid, const std::vector<double>& eps_levels,
                     std::size_t dim_cap) {
  grid.validate();
  std::vector<std::string> bad;
  if (eps_levels.empty()) bad.push_back("fieldsim: need at least one eps level");
  for (double e : eps_levels)
    if (!(e > 0.0)) bad.push_back("fieldsim: eps levels must be positive");
  const std::size_t dim = eps_levels.size() * grid.n_points;
  if (dim > dim_cap)
    bad.push_back("fieldsim: joint dimension " + std::to_string(dim) +
                  " exceeds cap " + std::to_string(dim_cap));
  if (!bad.empty()) throw validation_error(bad);
}

}  // namespace

Eigen::MatrixXd build_joint_covariance(const GridSpec& grid,
                                       const std::vector<double>& eps_levels,
                                       const cov::CovarianceSpec& spec,
                                       std::size_t dim_cap) {
  validate_inputs(grid, eps_levels, dim_cap);
  spec.validate();
  const std::size_t L = eps_levels.size();
  const std::size_t n = grid.n_points;
  const double delta = grid.delta();
  // Tight per-entry tolerance: smooth quadrature error across a near-singular
  // Toeplitz block can otherwise push eigenvalues below the jitter ladder.
  cov::CovEvaluator ev(spec, 1e-11);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(L * n), static_cast<Eigen::Index>(L * n));
  std::vector<double> table(n);
  for (std::size_t a = 0; a < L; ++a) {
    for (std::size_t b = a; b < L; ++b) {
      for (std::size_t k = 0; k < n; ++k) {
        // The last node can land one ulp past T; clamp before the domain check.
        double d = std::min(static_cast<double>(k) * delta, spec.T);
        table[k] = ev.cov(0.0, d, eps_levels[a], eps_levels[b]).value;
      }
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t k = i > j ? i - j : j - i;
          m(static_cast<Eigen::Index>(a * n + i), static_cast<Eigen::Index>(b * n + j)) =
              table[k];
          m(static_cast<Eigen::Index>(b * n + j), static_cast<Eigen::Index>(a * n + i)) =
              table[k];
        }
    }
  }
  return m;
}

FactorResult factor_spd(Eigen::MatrixXd m) {
  static const double ladder[] = {0.0, 1e-12, 1e-10, 1e-8, 1e-7, 1e-6};
  for (double jitter : ladder) {
    Eigen::MatrixXd trial = m;
    if (jitter > 0.0) trial.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(trial);
    if (llt.info() == Eigen::Success) {
      FactorResult out;
      out.chol_lower = llt.matrixL();
      out.jitter_used = jitter;
      return out;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  throw numerical_error(
      "fieldsim: covariance not factorable after the jitter ladder; most "
      "negative eigenvalue ~ " +
      g17(es.eigenvalues().minCoeff()));
}

FieldSampler::FieldSampler(const GridSpec& grid, std::vector<double> eps_levels,
                           const cov::CovarianceSpec& spec, std::size_t dim_cap)
    : grid_(grid), eps_levels_(std::move(eps_levels)) {
  Eigen::MatrixXd m = build_joint_covariance(grid_, eps_levels_, spec, dim_cap);
  const std::size_t n = grid_.n_points;
  sigma2_.resize(eps_levels_.size());
  for (std::size_t l = 0; l < eps_levels_.size(); ++l)
    sigma2_[l] = m(static_cast<Eigen::Index>(l * n), static_cast<Eigen::Index>(l * n));
  factor_ = factor_spd(std::move(m));
}

FieldSample FieldSampler::draw(std::uint64_t master_seed,
                               std::uint64_t replicate) const {
  const std::size_t n = grid_.n_points;
  const std::size_t L = eps_levels_.size();
  const std::size_t dim = L * n;
  rng::NormalStream stream(master_seed, replicate);
  Eigen::VectorXd z(static_cast<Eigen::Index>(dim));
  for (std::size_t k = 0; k < dim; ++k) z(static_cast<Eigen::Index>(k)) = stream.normal();
  Eigen::VectorXd x = factor_.chol_lower.triangularView<Eigen::Lower>() * z;
  FieldSample s;
  s.grid = grid_;
  s.eps_levels = eps_levels_;
  s.sigma2 = sigma2_;
  s.seed = rng::derive_seed(master_seed, replicate);
  s.replicate = replicate;
  s.jitter_used = factor_.jitter_used;
  s.values.assign(L, std::vector<double>(n));
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t i = 0; i < n; ++i)
      s.values[l][i] = x(static_cast<Eigen::Index>(l * n + i));
  return s;
}

std::vector<FieldSample> sample_fields(const GridSpec& grid,
                                       const std::vector<double>& eps_levels,
                                       const cov::CovarianceSpec& spec,
                                       std::uint64_t seed, std::size_t count) {
  FieldSampler sampler(grid, eps_levels, spec);
  std::vector<FieldSample> out;
  out.reserve(count);
  for (std::size_t r = 0; r < count; ++r) out.push_back(sampler.draw(seed, r));
  return out;
}

void write_fields_csv(std::ostream& os, const std::vector<FieldSample>& batch) {
  if (batch.empty()) return;
  const GridSpec& g = batch.front().grid;
  os << "replicate,level,eps,jitter";
  for (std::size_t i = 0; i < g.n_points; ++i) os << ",t=" << g17(g.node(i));
  os << "\n";
  for (const FieldSample& s : batch)
    for (std::size_t l = 0; l < s.eps_levels.size(); ++l) {
      os << s.replicate << "," << l << "," << g17(s.eps_levels[l]) << ","
         << g17(s.jitter_used);
      for (double v : s.values[l]) os << "," << g17(v);
      os << "\n";
    }
}

}  // namespace gmclab::field
