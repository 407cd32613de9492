#include "gmclab/projection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

#include "gmclab/errors.hpp"
#include "gmclab/fieldsim.hpp"
#include "gmclab/gmc.hpp"
#include "gmclab/potential.hpp"
#include "gmclab/quadrature.hpp"
#include "gmclab/stats.hpp"

namespace gmclab::projection {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check_betas(double beta, double beta_prime) {
  std::vector<std::string> bad;
  if (!(beta > 0.0) || !(beta < 1.0)) bad.push_back("projection: beta must lie in (0,1)");
  if (!(beta_prime > 0.0) || !(beta_prime < 1.0))
    bad.push_back("projection: beta_prime must lie in (0,1)");
  if (beta_prime < beta)
    bad.push_back("projection: needs beta_prime >= beta");
  if (!bad.empty()) throw validation_error(std::move(bad));
}

double kernel_lift(const cov::CovarianceSpec& spec, double alpha, double u) {
  return spec.h.is_zero() ? 1.0 : std::exp(alpha * spec.h(u));
}

}  // namespace

std::vector<double> project_kernel(const std::vector<double>& phi, double beta,
                                   double beta_prime, const GridSpec& grid,
                                   const cov::CovarianceSpec& spec) {
  check_betas(beta, beta_prime);
  potential::PotentialOperator cross = potential::build_G(beta * beta_prime, grid, spec);
  potential::PotentialOperator target =
      potential::build_G(beta_prime * beta_prime, grid, spec);
  return potential::invert_G(target, cross.apply(phi)).solution;
}

ProjectedSolution solve_projected_bvp(double beta, double beta_prime,
                                      const cov::CovarianceSpec& spec,
                                      const pressure::ForcingSpec& forcing,
                                      const pressure::BoundaryData& bc,
                                      const GridSpec& z_grid, const GridSpec& t_grid) {
  check_betas(beta, beta_prime);
  z_grid.validate();
  t_grid.validate();
  forcing.validate();
  if (std::fabs(z_grid.T - t_grid.T) > 1e-12 * std::max(1.0, t_grid.T))
    throw validation_error("projection: z and t grids must share the domain");
  if (std::fabs(forcing.T - t_grid.T) > 1e-12 * std::max(1.0, t_grid.T))
    throw validation_error("projection: forcing domain does not match the grids");
  if (!std::isfinite(bc.u1) || !std::isfinite(bc.u2))
    throw validation_error("projection: boundary data must be finite");
  using pressure::BcKind;
  if (bc.kind == BcKind::periodic && std::fabs(forcing.integral()) > 1e-12)
    throw validation_error(
        "projection: periodic problems need mean-zero forcing");
  if (bc.kind == BcKind::neumann &&
      std::fabs(bc.u2 - bc.u1 - forcing.F(forcing.T)) > 1e-12)
    throw validation_error(
        "projection: neumann data must satisfy u2 - u1 = F(T)");

  const double alpha = beta * beta_prime;

  ProjectedSolution sol;
  sol.beta = beta;
  sol.beta_prime = beta_prime;
  sol.z_grid = z_grid;
  sol.t_grid = t_grid;
  sol.bc = bc;

  const std::size_t mz = z_grid.n_cells();
  const std::size_t nt = t_grid.n_points;
  sol.u_tilde.assign(mz, std::vector<double>(nt, 0.0));

  for (std::size_t zi = 0; zi < mz; ++zi) {
    const double z = z_grid.cell_mid(zi);
    // Prefix potentials of the indicator and of F times the indicator, cell
    // by cell with the kernel integrated exactly and F, e^{alpha h} frozen at
    // cell midpoints.
    std::vector<double> ind(nt, 0.0), forced(nt, 0.0);
    for (std::size_t i = 1; i < nt; ++i) {
      double a = t_grid.node(i - 1), b = t_grid.node(i);
      double mid = t_grid.cell_mid(i - 1);
      double w = quad::power_cell_integral(z, a, b, alpha) *
                 kernel_lift(spec, alpha, z - mid);
      ind[i] = ind[i - 1] + w;
      forced[i] = forced[i - 1] + forcing.F(mid) * w;
    }
    const double denom = ind[nt - 1];

    double u0 = 0.0, slope = 0.0;
    switch (bc.kind) {
      case BcKind::ivp:
        u0 = bc.u1;
        slope = bc.u2;
        break;
      case BcKind::dirichlet:
        if (std::fabs(denom) < 1e-12)
          throw numerical_error("projection: degenerate indicator potential at z=" +
                                g17(z));
        u0 = bc.u1;
        slope = (bc.u2 - bc.u1 - forced[nt - 1]) / denom;
        break;
      case BcKind::neumann:
        u0 = 0.0;
        slope = bc.u1;
        break;
      case BcKind::periodic:
        if (std::fabs(denom) < 1e-12)
          throw numerical_error("projection: degenerate indicator potential at z=" +
                                g17(z));
        u0 = 0.0;
        slope = -forced[nt - 1] / denom;
        break;
    }
    for (std::size_t i = 0; i < nt; ++i)
      sol.u_tilde[zi][i] = u0 + slope * ind[i] + forced[i];
  }
  return sol;
}

pressure::ResidualReport projected_residual(const ProjectedSolution& sol,
                                            const cov::CovarianceSpec& spec,
                                            const pressure::ForcingSpec& forcing,
                                            std::size_t z_index) {
  if (z_index >= sol.u_tilde.size())
    throw validation_error("projection: z index out of range");
  const GridSpec& g = sol.t_grid;
  if (g.n_points < 3)
    throw validation_error("projection: need at least 3 time nodes for residuals");
  const double z = sol.z_grid.cell_mid(z_index);
  const double alpha = sol.beta * sol.beta_prime;
  const double delta = g.delta();
  const std::vector<double>& u = sol.u_tilde[z_index];

  // Finite-volume flux (u_{c+1} - u_c) / int_cell e^{bb' R(z,s)} ds per cell;
  // the harmonic cell weight stays finite through the kernel singularity, so
  // no nodes need excluding.  The cell integral is re-evaluated on an 8x
  // subdivision so the residual measures the solver's midpoint freezing
  // instead of reproducing it identically.
  const std::size_t cells = g.n_cells();
  std::vector<double> flux(cells, 0.0);
  for (std::size_t c = 0; c < cells; ++c) {
    double a = g.node(c), b = g.node(c + 1);
    double k = 0.0;
    for (int s = 0; s < 8; ++s) {
      double sa = a + (b - a) * static_cast<double>(s) / 8.0;
      double sb = a + (b - a) * static_cast<double>(s + 1) / 8.0;
      k += quad::power_cell_integral(z, sa, sb, alpha) *
           kernel_lift(spec, alpha, z - 0.5 * (sa + sb));
    }
    flux[c] = (u[c + 1] - u[c]) / k;
  }
  pressure::ResidualReport rep;
  double sum_sq = 0.0;
  for (std::size_t i = 1; i + 1 < g.n_points; ++i) {
    double r = -(flux[i] - flux[i - 1]) / delta - forcing.f(g.node(i));
    rep.max_abs = std::max(rep.max_abs, std::fabs(r));
    sum_sq += r * r;
    rep.n_interior += 1;
  }
  if (rep.n_interior > 0)
    rep.rms = std::sqrt(sum_sq / static_cast<double>(rep.n_interior));
  return rep;
}

RecoveryReport recover_kernel(ProjectedSolution& sol, const cov::CovarianceSpec& spec) {
  potential::PotentialOperator op =
      potential::build_G(sol.beta_prime * sol.beta_prime, sol.z_grid, spec);
  const std::size_t mz = sol.u_tilde.size();
  const std::size_t nt = sol.t_grid.n_points;
  if (mz != op.size())
    throw validation_error("projection: operator size does not match z grid");

  RecoveryReport rep;
  rep.condition_estimate = op.condition_estimate;
  sol.phi.assign(nt, std::vector<double>(mz, 0.0));
  sol.phi_dual_norm.assign(nt, 0.0);
  const double dual_order = -(1.0 - sol.beta_prime * sol.beta_prime) / 2.0;
  std::vector<double> rhs(mz);
  for (std::size_t k = 0; k < nt; ++k) {
    for (std::size_t zi = 0; zi < mz; ++zi) rhs[zi] = sol.u_tilde[zi][k];
    potential::InvertReport inv = potential::invert_G(op, rhs);
    rep.max_residual = std::max(rep.max_residual, inv.residual_norm);
    rep.regularized = rep.regularized || inv.regularized;
    sol.phi[k] = std::move(inv.solution);
    sol.phi_dual_norm[k] =
        potential::sobolev_norm(sol.phi[k], sol.z_grid.delta(), dual_order);
  }
  return rep;
}

McCheckReport projected_mc_check(const ProjectedSolution& sol,
                                 const cov::CovarianceSpec& spec,
                                 std::size_t replicates, double eps,
                                 std::uint64_t seed) {
  if (sol.phi.empty())
    throw validation_error("projection: recover_kernel must run before the mc check");
  if (replicates < 100)
    throw validation_error("projection: mc check needs at least 100 replicates");

  const std::size_t nt = sol.t_grid.n_points;
  std::size_t t_index = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nt; ++i) {
    double d = std::fabs(sol.t_grid.node(i) - sol.t_grid.T / 2.0);
    if (d < best) {
      best = d;
      t_index = i;
    }
  }

  // Test functions sampled at the z-cell midpoints, matching both the
  // deterministic pairing with u~ and the cell-mass pairing with mu.
  const std::size_t mz = sol.z_grid.n_cells();
  const double delta = sol.z_grid.delta();
  std::vector<std::vector<double>> psis;
  for (int k = 0; k < 8; ++k) {
    std::vector<double> psi(mz);
    for (std::size_t i = 0; i < mz; ++i)
      psi[i] = std::cos(k * kPi * sol.z_grid.cell_mid(i) / sol.z_grid.T);
    psis.push_back(std::move(psi));
  }

  field::FieldSampler sampler(sol.z_grid, {eps}, spec);
  std::vector<stats::Moments> acc(psis.size());
  const std::vector<double>& phi_t = sol.phi[t_index];
  for (std::size_t r = 0; r < replicates; ++r) {
    field::FieldSample s = sampler.draw(seed, r);
    gmc::GmcMeasure mu = gmc::gmc_from_field(s, 0, sol.beta_prime);
    double z_val = 0.0;
    for (std::size_t j = 0; j < mz; ++j) z_val += phi_t[j] * mu.cell_mass[j];
    for (std::size_t p = 0; p < psis.size(); ++p) {
      double v = 0.0;
      for (std::size_t j = 0; j < mz; ++j) v += psis[p][j] * mu.cell_mass[j];
      double prod = z_val * v;
      stats::Moments& m = acc[p];
      m.n += 1;
      m.sum += prod;
      m.sum_sq += prod * prod;
      m.min = std::min(m.min, prod);
      m.max = std::max(m.max, prod);
    }
  }

  McCheckReport rep;
  rep.t = sol.t_grid.node(t_index);
  rep.eps = eps;
  rep.replicates = replicates;
  rep.seed = seed;
  for (std::size_t p = 0; p < psis.size(); ++p) {
    double det = 0.0;
    for (std::size_t j = 0; j < mz; ++j)
      det += delta * psis[p][j] * sol.u_tilde[j][t_index];
    double mc = acc[p].mean();
    double se = acc[p].std_error();
    rep.mc_value.push_back(mc);
    rep.det_value.push_back(det);
    rep.std_error.push_back(se);
    double disc = std::fabs(mc - det);
    rep.max_abs_discrepancy = std::max(rep.max_abs_discrepancy, disc);
    if (se > 0.0) rep.max_se_units = std::max(rep.max_se_units, disc / se);
  }
  return rep;
}

std::string McCheckReport::to_json() const {
  nlohmann::json j;
  j["t"] = t;
  j["eps"] = eps;
  j["replicates"] = replicates;
  j["seed"] = seed;
  j["mc_value"] = mc_value;
  j["det_value"] = det_value;
  j["std_error"] = std_error;
  j["max_abs_discrepancy"] = max_abs_discrepancy;
  j["max_se_units"] = max_se_units;
  return j.dump(2);
}

void write_u_tilde_csv(std::ostream& os, const ProjectedSolution& sol) {
  os << "z";
  for (std::size_t i = 0; i < sol.t_grid.n_points; ++i)
    os << ",t=" << g17(sol.t_grid.node(i));
  os << "\n";
  for (std::size_t zi = 0; zi < sol.u_tilde.size(); ++zi) {
    os << g17(sol.z_grid.cell_mid(zi));
    for (double v : sol.u_tilde[zi]) os << ',' << g17(v);
    os << "\n";
  }
}

void write_phi_csv(std::ostream& os, const ProjectedSolution& sol) {
  os << "t";
  for (std::size_t zi = 0; zi < sol.z_grid.n_cells(); ++zi)
    os << ",z=" << g17(sol.z_grid.cell_mid(zi));
  os << "\n";
  for (std::size_t k = 0; k < sol.phi.size(); ++k) {
    os << g17(sol.t_grid.node(k));
    for (double v : sol.phi[k]) os << ',' << g17(v);
    os << "\n";
  }
}

std::string manifest_json(const ProjectedSolution& sol) {
  nlohmann::json j;
  j["beta"] = sol.beta;
  j["beta_prime"] = sol.beta_prime;
  j["bc"] = {{"kind", static_cast<int>(sol.bc.kind)},
             {"u1", sol.bc.u1},
             {"u2", sol.bc.u2}};
  j["z_grid"] = {{"T", sol.z_grid.T}, {"n_points", sol.z_grid.n_points}};
  j["t_grid"] = {{"T", sol.t_grid.T}, {"n_points", sol.t_grid.n_points}};
  j["phi_dual_norm"] = sol.phi_dual_norm;
  return j.dump(2);
}

}  // namespace gmclab::projection
