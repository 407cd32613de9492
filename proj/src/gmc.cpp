#include "gmclab/gmc.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>

#include "gmclab/stats.hpp"

namespace gmclab::gmc {

double GmcMeasure::total() const {
  return std::accumulate(cell_mass.begin(), cell_mass.end(), 0.0);
}

double GmcMeasure::window_mass(std::size_t first_cell, std::size_t n_cells) const {
  if (first_cell + n_cells > cell_mass.size())
    throw validation_error("gmc: window extends past the last cell");
  double acc = 0.0;
  for (std::size_t i = 0; i < n_cells; ++i) acc += cell_mass[first_cell + i];
  return acc;
}

GmcMeasure gmc_from_field(const field::FieldSample& sample, std::size_t level,
                          double beta) {
  std::vector<std::string> bad;
  if (!(beta > 0.0 && beta < 1.0)) bad.push_back("gmc: beta must lie in (0,1)");
  if (level >= sample.eps_levels.size())
    bad.push_back("gmc: field sample has no such level");
  if (!bad.empty()) throw validation_error(bad);

  const auto& x = sample.values[level];
  const double sigma2 = sample.sigma2[level];
  const double delta = sample.grid.delta();
  const double shift = 0.5 * beta * beta * sigma2;

  GmcMeasure m;
  m.grid = sample.grid;
  m.beta = beta;
  m.eps = sample.eps_levels[level];
  m.cell_mass.resize(sample.grid.n_cells());
  for (std::size_t i = 0; i < m.cell_mass.size(); ++i)
    m.cell_mass[i] = std::exp(beta * x[i] - shift) * delta;
  return m;
}

namespace {

MomentReport report_from_transformed(std::span<const double> xs, double beta,
                                     double eps, double p, std::uint64_t seed) {
  MomentReport r;
  r.beta = beta;
  r.eps = eps;
  r.p = p;
  r.n_replicates = xs.size();
  r.seed = seed;
  r.estimate = stats::reduce_moments(xs).mean();
  auto ci = stats::bootstrap_mean_ci(xs, seed);
  r.ci_low = ci.lo;
  r.ci_high = ci.hi;
  r.divergence_warning = p >= 2.0 / (beta * beta);
  return r;
}

}  // namespace

MomentReport total_mass_moment(const std::vector<GmcMeasure>& measures, double p,
                               std::uint64_t bootstrap_seed) {
  std::vector<std::string> bad;
  if (measures.empty()) bad.push_back("gmc: moment of an empty measure batch");
  if (p == 0.0) bad.push_back("gmc: moment order must be nonzero");
  if (!bad.empty()) throw validation_error(bad);
  const double beta = measures.front().beta;
  const double eps = measures.front().eps;
  for (const auto& m : measures)
    if (m.beta != beta || m.eps != eps)
      throw validation_error("gmc: measures in a batch must share beta and eps");

  std::vector<double> xs(measures.size());
  for (std::size_t r = 0; r < measures.size(); ++r)
    xs[r] = std::pow(measures[r].total(), p);
  return report_from_transformed(xs, beta, eps, p, bootstrap_seed);
}

std::string MomentReport::to_json() const {
  nlohmann::json j;
  j["beta"] = beta;
  j["eps"] = eps;
  j["p"] = p;
  j["estimate"] = estimate;
  j["ci_low"] = ci_low;
  j["ci_high"] = ci_high;
  j["n_replicates"] = n_replicates;
  j["seed"] = seed;
  j["divergence_warning"] = divergence_warning;
  return j.dump();
}

HolderFit holder_modulus_fit(const std::vector<GmcMeasure>& measures) {
  if (measures.size() < 100)
    throw validation_error("gmc: modulus fit needs at least 100 measures");
  const std::size_t n_cells = measures.front().cell_mass.size();
  const double delta = measures.front().grid.delta();

  HolderFit fit;
  for (std::size_t w = 4; w <= n_cells / 4; w *= 2) {
    double mean_log = 0.0;
    for (const auto& m : measures) {
      double best = 0.0;
      double run = m.window_mass(0, w);
      best = run;
      for (std::size_t s = 1; s + w <= n_cells; ++s) {
        run += m.cell_mass[s + w - 1] - m.cell_mass[s - 1];
        best = std::max(best, run);
      }
      if (!(best > 0.0))
        throw numerical_error("gmc: zero window mass degenerates the modulus fit");
      mean_log += std::log(best);
    }
    fit.log_delta.push_back(std::log(static_cast<double>(w) * delta));
    fit.log_max_mass.push_back(mean_log / static_cast<double>(measures.size()));
  }
  if (fit.log_delta.size() < 2)
    throw numerical_error("gmc: grid too small for a dyadic window range");
  auto line = stats::fit_line(fit.log_delta, fit.log_max_mass);
  fit.eta = line.slope;
  fit.r_squared = line.r_squared;
  return fit;
}

KahaneReport kahane_negative_moment_check(const cov::CovarianceSpec& spec,
                                          const GridSpec& grid, double beta,
                                          double eps_coarse, double eps_fine,
                                          double p, std::size_t replicates,
                                          std::uint64_t seed) {
  std::vector<std::string> bad;
  if (!(eps_coarse >= eps_fine && eps_fine > 0.0))
    bad.push_back("gmc: need eps_coarse >= eps_fine > 0");
  if (!(p < 0.0)) bad.push_back("gmc: kahane check is for negative moments");
  if (replicates < 2) bad.push_back("gmc: need at least 2 replicates");
  if (!bad.empty()) throw validation_error(bad);

  KahaneReport out;
  out.beta = beta;
  out.p = p;

  std::vector<double> xc(replicates), xf(replicates);
  if (eps_coarse == eps_fine) {
    field::FieldSampler sampler(grid, {eps_fine}, spec);
    for (std::size_t r = 0; r < replicates; ++r) {
      auto m = gmc_from_field(sampler.draw(seed, r), 0, beta);
      xc[r] = xf[r] = std::pow(m.total(), p);
    }
  } else {
    field::FieldSampler coarse(grid, {eps_coarse}, spec);
    field::FieldSampler fine(grid, {eps_fine}, spec);
    for (std::size_t r = 0; r < replicates; ++r) {
      xc[r] = std::pow(gmc_from_field(coarse.draw(seed, r), 0, beta).total(), p);
      xf[r] = std::pow(
          gmc_from_field(fine.draw(seed, r + replicates), 0, beta).total(), p);
    }
  }
  out.coarse = report_from_transformed(xc, beta, eps_coarse, p, seed ^ 0xC0A5);
  out.fine = report_from_transformed(xf, beta, eps_fine, p, seed ^ 0xF12E);
  out.ordering_holds = out.coarse.ci_low <= out.fine.ci_high;
  return out;
}

}  // namespace gmclab::gmc
