#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gmclab/chaos.hpp"
#include "gmclab/covkernel.hpp"
#include "gmclab/errors.hpp"
#include "gmclab/fieldsim.hpp"
#include "gmclab/gmc.hpp"
#include "gmclab/potential.hpp"
#include "gmclab/pressure1d.hpp"
#include "gmclab/projection.hpp"
#include "gmclab/quadrature.hpp"
#include "gmclab/rng.hpp"
#include "gmclab/stats.hpp"

using namespace gmclab;
using namespace gmclab::projection;
using pressure::BcKind;
using pressure::BoundaryData;
using pressure::ForcingSpec;

namespace {

constexpr double kPi = 3.14159265358979323846;

double lift(const cov::CovarianceSpec& spec, double alpha, double u) {
  return spec.h.is_zero() ? 1.0 : std::exp(alpha * spec.h(u));
}

// Smooth even bump of size 1/2 vanishing at the table edge, small enough
// that e^{alpha h} stays O(1).
cov::HTable mild_h() {
  std::vector<double> values(2049);
  for (std::size_t i = 0; i < values.size(); ++i) {
    double u = -1.0 + 2.0 * static_cast<double>(i) / 2048.0;
    values[i] = 0.25 * (1.0 + std::cos(kPi * u));
  }
  return cov::HTable::from_table(0.9, std::move(values));
}

// Transported solution by product integration on a refine-times finer
// subdivision, mirroring the solver's per-BC constants.
std::vector<double> oracle_transport(double z, const GridSpec& tg, double beta,
                                     double beta_prime,
                                     const cov::CovarianceSpec& spec,
                                     const ForcingSpec& forcing,
                                     const BoundaryData& bc, int refine) {
  const double alpha = beta * beta_prime;
  std::vector<double> ind(tg.n_points, 0.0), forced(tg.n_points, 0.0);
  for (std::size_t i = 1; i < tg.n_points; ++i) {
    double a = tg.node(i - 1), b = tg.node(i);
    double ci = 0.0, fi = 0.0;
    for (int s = 0; s < refine; ++s) {
      double sa = a + (b - a) * s / refine;
      double sb = a + (b - a) * (s + 1) / refine;
      double sm = 0.5 * (sa + sb);
      double w = quad::power_cell_integral(z, sa, sb, alpha) * lift(spec, alpha, z - sm);
      ci += w;
      fi += forcing.F(sm) * w;
    }
    ind[i] = ind[i - 1] + ci;
    forced[i] = forced[i - 1] + fi;
  }
  double u0 = 0.0, slope = 0.0;
  switch (bc.kind) {
    case BcKind::ivp: u0 = bc.u1; slope = bc.u2; break;
    case BcKind::dirichlet:
      u0 = bc.u1;
      slope = (bc.u2 - bc.u1 - forced.back()) / ind.back();
      break;
    case BcKind::neumann: u0 = 0.0; slope = bc.u1; break;
    case BcKind::periodic: u0 = 0.0; slope = -forced.back() / ind.back(); break;
  }
  std::vector<double> out(tg.n_points);
  for (std::size_t i = 0; i < tg.n_points; ++i)
    out[i] = u0 + slope * ind[i] + forced[i];
  return out;
}

// iint psi(z) phi(y) |z-y|^{-alpha} e^{alpha h(z-y)} dz dy with psi, phi
// piecewise constant on the grid cells, outer midpoints on a refine-times
// finer subdivision and inner cells integrated exactly.
double cross_moment(const std::vector<double>& psi, const std::vector<double>& phi,
                    double alpha, const GridSpec& g,
                    const cov::CovarianceSpec& spec, int refine) {
  const double d = g.delta();
  const double wz = d / refine;
  double total = 0.0;
  for (std::size_t zc = 0; zc < g.n_cells(); ++zc) {
    for (int rz = 0; rz < refine; ++rz) {
      double zs = g.node(zc) + (rz + 0.5) * wz;
      double inner = 0.0;
      for (std::size_t yc = 0; yc < g.n_cells(); ++yc) {
        double cell = 0.0;
        for (int ry = 0; ry < refine; ++ry) {
          double ya = g.node(yc) + ry * wz;
          double yb = g.node(yc) + (ry + 1) * wz;
          cell += quad::power_cell_integral(zs, ya, yb, alpha) *
                  lift(spec, alpha, zs - 0.5 * (ya + yb));
        }
        inner += phi[yc] * cell;
      }
      total += psi[zc] * wz * inner;
    }
  }
  return total;
}

void push(stats::Moments& m, double v) {
  m.n += 1;
  m.sum += v;
  m.sum_sq += v * v;
  m.min = std::min(m.min, v);
  m.max = std::max(m.max, v);
}

}  // namespace

TEST_CASE("projected solutions reproduce closed forms on the power kernel") {
  cov::CovarianceSpec spec;
  const double beta = 0.4, bp = 0.6, alpha = beta * bp;
  GridSpec zg{1.0, 17}, tg{1.0, 129};

  SUBCASE("ivp and neumann against the exact indicator potential") {
    for (BoundaryData bc : {BoundaryData{BcKind::ivp, 0.7, 1.3},
                            BoundaryData{BcKind::neumann, 0.5, 0.5}}) {
      ProjectedSolution sol = solve_projected_bvp(
          beta, bp, spec, ForcingSpec::zero(1.0), bc, zg, tg);
      double u0 = bc.kind == BcKind::ivp ? bc.u1 : 0.0;
      double a = bc.kind == BcKind::ivp ? bc.u2 : bc.u1;
      for (std::size_t zi = 0; zi < zg.n_cells(); ++zi) {
        double z = zg.cell_mid(zi);
        for (std::size_t i = 0; i < tg.n_points; ++i) {
          double want =
              u0 + a * potential::riesz_indicator_exact(alpha, tg.node(i), z, 1.0);
          CHECK(std::fabs(sol.u_tilde[zi][i] - want) < 1e-12);
        }
      }
    }
  }

  SUBCASE("dirichlet hits both endpoints and its quotient stays bounded below") {
    BoundaryData bc{BcKind::dirichlet, -0.2, 0.9};
    ForcingSpec fs = ForcingSpec::sine(1.0, 2, 1.0);
    ProjectedSolution sol = solve_projected_bvp(beta, bp, spec, fs, bc, zg, tg);
    for (std::size_t zi = 0; zi < zg.n_cells(); ++zi) {
      CHECK(sol.u_tilde[zi][0] == bc.u1);
      CHECK(std::fabs(sol.u_tilde[zi][tg.n_points - 1] - bc.u2) < 1e-10);
      // z^p + (1-z)^p >= 1 for p in (0,1) bounds the indicator potential
      // away from zero on the whole interior.
      double denom = potential::riesz_indicator_exact(alpha, 1.0, zg.cell_mid(zi), 1.0);
      CHECK(denom > 1.0 / (1.0 - alpha));
    }
  }

  SUBCASE("periodic solutions wrap and pin the left endpoint at zero") {
    ProjectedSolution sol =
        solve_projected_bvp(beta, bp, spec, ForcingSpec::sine(0.8, 1, 1.0),
                            BoundaryData{BcKind::periodic, 0.0, 0.0}, zg, tg);
    for (std::size_t zi = 0; zi < zg.n_cells(); ++zi) {
      CHECK(sol.u_tilde[zi][0] == 0.0);
      CHECK(std::fabs(sol.u_tilde[zi][tg.n_points - 1]) < 1e-12);
    }
  }
}

TEST_CASE("projected bvp rejects inconsistent inputs") {
  cov::CovarianceSpec spec;
  GridSpec zg{1.0, 9}, tg{1.0, 33};
  ForcingSpec fs = ForcingSpec::zero(1.0);
  BoundaryData ivp{BcKind::ivp, 0.0, 1.0};

  CHECK_THROWS_AS(solve_projected_bvp(0.6, 0.4, spec, fs, ivp, zg, tg),
                  validation_error);
  CHECK_THROWS_AS(solve_projected_bvp(0.0, 0.5, spec, fs, ivp, zg, tg),
                  validation_error);
  CHECK_THROWS_AS(solve_projected_bvp(0.4, 1.0, spec, fs, ivp, zg, tg),
                  validation_error);
  CHECK_THROWS_AS(solve_projected_bvp(0.4, 0.6, spec, fs, ivp, GridSpec{2.0, 9}, tg),
                  validation_error);
  CHECK_THROWS_AS(solve_projected_bvp(0.4, 0.6, spec, ForcingSpec::zero(0.5), ivp,
                                      zg, tg),
                  validation_error);
  CHECK_THROWS_AS(
      solve_projected_bvp(0.4, 0.6, spec, ForcingSpec::constant(0.5, 1.0),
                          BoundaryData{BcKind::periodic, 0.0, 0.0}, zg, tg),
      validation_error);
  CHECK_THROWS_AS(
      solve_projected_bvp(0.4, 0.6, spec, fs,
                          BoundaryData{BcKind::neumann, 0.3, 0.7}, zg, tg),
      validation_error);

  ProjectedSolution sol = solve_projected_bvp(0.4, 0.6, spec, fs, ivp, zg, tg);
  CHECK_THROWS_AS(projected_residual(sol, spec, fs, zg.n_cells()), validation_error);
  CHECK_THROWS_AS(projected_mc_check(sol, spec, 100, 0.05, 1), validation_error);
  recover_kernel(sol, spec);
  CHECK_THROWS_AS(projected_mc_check(sol, spec, 50, 0.05, 1), validation_error);
}

TEST_CASE("projected residuals vanish for exact data and decay under refinement") {
  cov::CovarianceSpec spec;
  GridSpec zg{1.0, 9};

  SUBCASE("constant-flux solutions satisfy the scheme identically") {
    ProjectedSolution sol = solve_projected_bvp(
        0.4, 0.6, spec, ForcingSpec::zero(1.0), BoundaryData{BcKind::ivp, 0.7, 1.3},
        zg, GridSpec{1.0, 129});
    for (std::size_t zi : {std::size_t{0}, std::size_t{4}}) {
      pressure::ResidualReport rep =
          projected_residual(sol, spec, ForcingSpec::zero(1.0), zi);
      CHECK(rep.n_interior == 127);
      CHECK(rep.max_abs < 1e-9);
    }
  }

  SUBCASE("midpoint freezing of smooth forcing is second order") {
    ForcingSpec fs = ForcingSpec::sine(0.9, 1, 1.0);
    std::vector<double> deltas, maxima;
    for (std::size_t n : {33u, 65u, 129u}) {
      GridSpec tg{1.0, n};
      ProjectedSolution sol = solve_projected_bvp(
          0.4, 0.6, spec, fs, BoundaryData{BcKind::ivp, 0.0, 1.0}, zg, tg);
      pressure::ResidualReport rep = projected_residual(sol, spec, fs, 3);
      deltas.push_back(std::log(tg.delta()));
      maxima.push_back(std::log(rep.max_abs));
    }
    stats::LineFit fit = stats::fit_line(deltas, maxima);
    CHECK(fit.slope > 1.7);
    CHECK(fit.slope < 2.3);
  }

  SUBCASE("perturbed kernels keep at least first order at every tested z") {
    cov::CovarianceSpec hspec;
    hspec.h = cov::build_nondegenerate_h(1.0, 1.0).h;
    ForcingSpec fs = ForcingSpec::sine(0.8, 1, 1.0);
    for (std::size_t zi : {std::size_t{0}, std::size_t{3}, std::size_t{7}}) {
      std::vector<double> deltas, maxima, rmss;
      for (std::size_t n : {65u, 129u, 257u}) {
        GridSpec tg{1.0, n};
        ProjectedSolution sol = solve_projected_bvp(
            0.5, 0.7, hspec, fs, BoundaryData{BcKind::dirichlet, 0.0, 1.0}, zg, tg);
        pressure::ResidualReport rep = projected_residual(sol, hspec, fs, zi);
        deltas.push_back(std::log(tg.delta()));
        maxima.push_back(std::log(rep.max_abs));
        rmss.push_back(rep.rms);
      }
      CHECK(stats::fit_line(deltas, maxima).slope > 0.9);
      CHECK(rmss[2] < rmss[0]);
    }
  }
}

TEST_CASE("transported solutions match refined product integration at equal betas") {
  cov::CovarianceSpec spec;
  spec.h = mild_h();
  const double beta = 0.4;
  GridSpec zg{1.0, 17}, tg{1.0, 513};
  ForcingSpec fs = ForcingSpec::sine(0.7, 1, 1.0);

  for (BoundaryData bc : {BoundaryData{BcKind::ivp, 0.3, 1.1},
                          BoundaryData{BcKind::dirichlet, 0.3, 1.1}}) {
    ProjectedSolution sol = solve_projected_bvp(beta, beta, spec, fs, bc, zg, tg);
    for (std::size_t zi : {std::size_t{1}, std::size_t{8}, std::size_t{14}}) {
      std::vector<double> want = oracle_transport(zg.cell_mid(zi), tg, beta, beta,
                                                  spec, fs, bc, 64);
      double worst = 0.0;
      for (std::size_t i = 0; i < tg.n_points; ++i)
        worst = std::max(worst, std::fabs(sol.u_tilde[zi][i] - want[i]));
      CHECK(worst < 5e-5);
    }
  }
}

TEST_CASE("wick chaos s transforms agree along projected covariance profiles") {
  cov::CovarianceSpec spec;
  spec.beta = 0.4;
  GridSpec grid{1.0, 5};
  const double eps = 0.5;
  pressure::ChaosField cf =
      pressure::chaos_field_from_covariance(grid, spec, eps, 5);
  REQUIRE(cf.n_vars == 5);
  ForcingSpec fs = ForcingSpec::sine(0.8, 1, 1.0);

  cov::CovEvaluator ev(spec);
  Eigen::MatrixXd L(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int k = 0; k < 5; ++k)
      L(i, k) = cf.loadings[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];

  for (BoundaryData bc : {BoundaryData{BcKind::ivp, 0.5, 1.5},
                          BoundaryData{BcKind::neumann, 0.3, 0.3}}) {
    pressure::ChaosSolution wick = pressure::solve_wick_chaos(cf, fs, bc, 10);
    for (double z : {0.3, 0.55}) {
      // Gaussian point whose pairing with the field matches the covariance
      // profile beta E[X(z) X(t_j)] at every node.
      Eigen::VectorXd p(5);
      for (int j = 0; j < 5; ++j)
        p(j) = spec.beta *
               ev.cov(0.0, std::fabs(z - grid.node(static_cast<std::size_t>(j))),
                      eps, eps)
                   .value;
      Eigen::VectorXd h = L.colPivHouseholderQr().solve(p);
      REQUIRE((L * h - p).norm() < 1e-10);
      chaos::GaussianPoint pt{{h(0), h(1), h(2), h(3), h(4)}, 1.0};

      std::vector<double> profile(grid.n_points);
      for (std::size_t j = 0; j < grid.n_points; ++j)
        profile[j] = spec.beta * p(static_cast<int>(j));
      std::vector<double> side = pressure::solve_s_side(grid, profile, fs, bc);
      for (std::size_t i = 0; i < grid.n_points; ++i)
        CHECK(std::fabs(chaos::s_transform(wick.values[i], pt) - side[i]) < 1e-7);
    }
  }
}

TEST_CASE("the mollified deterministic side approaches the exact transported solution") {
  cov::CovarianceSpec spec;
  spec.beta = 0.4;
  GridSpec grid{1.0, 65}, zg{1.0, 65}, tg{1.0, 257};
  ForcingSpec fs = ForcingSpec::sine(0.7, 1, 1.0);
  BoundaryData bc{BcKind::ivp, 0.5, 1.5};
  const std::size_t zi = 32;
  const double z = zg.cell_mid(zi);

  ProjectedSolution sol = solve_projected_bvp(0.4, 0.4, spec, fs, bc, zg, tg);
  cov::CovEvaluator ev(spec);
  std::vector<double> gaps;
  for (double eps : {0.5, 0.125}) {
    std::vector<double> profile(grid.n_points);
    for (std::size_t j = 0; j < grid.n_points; ++j)
      profile[j] = spec.beta * spec.beta *
                   ev.cov(0.0, std::fabs(z - grid.node(j)), eps, eps).value;
    std::vector<double> side = pressure::solve_s_side(grid, profile, fs, bc);
    double gap = 0.0;
    for (std::size_t i = 0; i < grid.n_points; ++i)
      gap = std::max(gap, std::fabs(side[i] - sol.u_tilde[zi][4 * i]));
    gaps.push_back(gap);
  }
  CHECK(gaps[1] < 0.8 * gaps[0]);
}

TEST_CASE("kernel projection preserves identity and cross moments") {
  cov::CovarianceSpec spec;
  spec.h = mild_h();
  GridSpec grid{1.0, 65};

  std::vector<double> phi(grid.n_cells()), psi(grid.n_cells());
  for (std::size_t i = 0; i < grid.n_cells(); ++i) {
    double x = grid.cell_mid(i);
    phi[i] = std::sin(2.0 * kPi * x) * std::exp(x - 1.0) + 0.2;
    psi[i] = std::cos(kPi * x);
  }

  SUBCASE("equal betas make the projection the identity") {
    std::vector<double> same = project_kernel(phi, 0.5, 0.5, grid, spec);
    for (std::size_t i = 0; i < phi.size(); ++i)
      CHECK(std::fabs(same[i] - phi[i]) < 1e-8);
  }

  SUBCASE("cross moments computed by refined quadrature coincide") {
    const double beta = 0.4, bp = 0.6;
    std::vector<double> phi_p = project_kernel(phi, beta, bp, grid, spec);
    double lhs = cross_moment(psi, phi, beta * bp, grid, spec, 6);
    double rhs = cross_moment(psi, phi_p, bp * bp, grid, spec, 6);
    CHECK(std::fabs(lhs - rhs) < 1e-5);
  }

  SUBCASE("coupled monte carlo reproduces the mollified cross moments") {
    const double beta = 0.4, bp = 0.6;
    std::vector<double> phi_p = project_kernel(phi, beta, bp, grid, spec);
    cov::CovEvaluator ev(spec);

    std::vector<double> preds;
    for (double eps : {0.04, 0.02}) {
      double pred = 0.0;
      for (std::size_t i = 0; i < grid.n_cells(); ++i)
        for (std::size_t j = 0; j < grid.n_cells(); ++j) {
          double c = ev.cov(grid.node(i), grid.node(j), eps, eps).value;
          pred += psi[j] * (phi[i] * std::exp(beta * bp * c) -
                            phi_p[i] * std::exp(bp * bp * c)) *
                  grid.delta() * grid.delta();
        }
      preds.push_back(pred);
    }
    // The mollified mismatch between the two representations shrinks with
    // the smoothing scale.
    CHECK(std::fabs(preds[1]) < 0.9 * std::fabs(preds[0]));

    const double eps = 0.04;
    field::FieldSampler sampler(grid, {eps}, spec);
    stats::Moments diff;
    for (std::size_t r = 0; r < 20000; ++r) {
      field::FieldSample s = sampler.draw(9090, r);
      gmc::GmcMeasure mb = gmc::gmc_from_field(s, 0, beta);
      gmc::GmcMeasure mp = gmc::gmc_from_field(s, 0, bp);
      double zval = 0.0, zpval = 0.0, vval = 0.0;
      for (std::size_t i = 0; i < grid.n_cells(); ++i) {
        zval += phi[i] * mb.cell_mass[i];
        zpval += phi_p[i] * mp.cell_mass[i];
        vval += psi[i] * mp.cell_mass[i];
      }
      push(diff, zval * vval - zpval * vval);
    }
    CHECK(std::fabs(diff.mean() - preds[0]) < 4.0 * diff.std_error());
  }
}

TEST_CASE("recovered kernels invert the potential map") {
  cov::CovarianceSpec spec;
  const double beta = 0.5;
  BoundaryData bc{BcKind::ivp, 0.0, 1.0};
  ForcingSpec fs = ForcingSpec::zero(1.0);

  SUBCASE("indicator kernels reappear for the closed-form solution") {
    GridSpec zg{1.0, 65}, tg{1.0, 65};
    ProjectedSolution sol = solve_projected_bvp(beta, beta, spec, fs, bc, zg, tg);
    RecoveryReport rep = recover_kernel(sol, spec);
    CHECK(rep.max_residual < 1e-6);
    CHECK_FALSE(rep.regularized);
    CHECK(rep.condition_estimate > 1.0);

    for (std::size_t k : {std::size_t{16}, std::size_t{32}, std::size_t{48}}) {
      double t = tg.node(k);
      double lo = 0.0, hi = 0.0;
      std::size_t nlo = 0, nhi = 0;
      for (std::size_t i = 0; i < zg.n_cells(); ++i) {
        double m = zg.cell_mid(i);
        if (m > 0.05 && m < t - 0.1) { lo += sol.phi[k][i]; nlo += 1; }
        if (m > t + 0.1 && m < 0.95) { hi += sol.phi[k][i]; nhi += 1; }
      }
      CHECK(std::fabs(lo / static_cast<double>(nlo) - 1.0) < 0.05);
      CHECK(std::fabs(hi / static_cast<double>(nhi)) < 0.05);
    }
  }

  SUBCASE("dual norms of the kernel stay bounded under z refinement") {
    GridSpec tg{1.0, 33};
    std::vector<double> worst;
    for (std::size_t nz : {33u, 65u, 129u}) {
      ProjectedSolution sol =
          solve_projected_bvp(beta, beta, spec, fs, bc, GridSpec{1.0, nz}, tg);
      recover_kernel(sol, spec);
      worst.push_back(*std::max_element(sol.phi_dual_norm.begin(),
                                        sol.phi_dual_norm.end()));
      CHECK(std::isfinite(worst.back()));
    }
    CHECK(worst[1] < 1.25 * worst[0]);
    CHECK(worst[2] < 1.25 * worst[1]);
  }

  SUBCASE("the dirichlet quotient keeps a bounded sobolev norm under refinement") {
    const double bp = 0.6, alpha = beta * bp;
    ForcingSpec sine = ForcingSpec::sine(1.0, 2, 1.0);
    std::vector<double> norms;
    for (std::size_t nz : {33u, 65u, 129u}) {
      GridSpec zg{1.0, nz};
      GridSpec tq{1.0, 257};
      std::vector<double> q(zg.n_cells());
      for (std::size_t i = 0; i < zg.n_cells(); ++i) {
        double z = zg.cell_mid(i);
        double forced = 0.0;
        for (std::size_t c = 0; c < tq.n_cells(); ++c)
          forced += sine.F(tq.cell_mid(c)) *
                    quad::power_cell_integral(z, tq.node(c), tq.node(c + 1), alpha);
        q[i] = (0.9 + 0.2 - forced) /
               potential::riesz_indicator_exact(alpha, 1.0, z, 1.0);
      }
      norms.push_back(potential::sobolev_norm(q, zg.delta(), (1.0 - bp * bp) / 2.0));
    }
    CHECK(norms[1] < 1.2 * norms[0]);
    CHECK(norms[2] < 1.2 * norms[1]);
  }
}

TEST_CASE("monte carlo pairings confirm the projected solutions") {
  cov::CovarianceSpec spec;
  spec.beta = 0.4;
  const double beta = 0.4;
  ForcingSpec fs = ForcingSpec::sine(0.7, 1, 1.0);
  BoundaryData bc{BcKind::ivp, 0.5, 1.5};

  SUBCASE("paired moments agree at the midpoint time") {
    GridSpec zg{1.0, 129}, tg{1.0, 65};
    ProjectedSolution sol = solve_projected_bvp(beta, beta, spec, fs, bc, zg, tg);
    recover_kernel(sol, spec);
    McCheckReport rep = projected_mc_check(sol, spec, 10000, 0.02, 4242);
    CHECK(rep.t == 0.5);
    CHECK(rep.replicates == 10000);
    CHECK(rep.mc_value.size() == 8);
    CHECK(rep.max_se_units < 4.0);

    nlohmann::json j = nlohmann::json::parse(rep.to_json());
    CHECK(j["eps"] == 0.02);
    CHECK(j["mc_value"].size() == 8);
    CHECK(j.contains("max_se_units"));
  }

  SUBCASE("a test function orthogonal in the potential inner product pairs to zero") {
    GridSpec zg{1.0, 129}, tg{1.0, 65};
    ProjectedSolution sol = solve_projected_bvp(beta, beta, spec, fs, bc, zg, tg);
    recover_kernel(sol, spec);
    const std::size_t k = 32;
    const std::vector<double>& phi_t = sol.phi[k];

    std::vector<double> gphi(zg.n_cells());
    for (std::size_t i = 0; i < zg.n_cells(); ++i) gphi[i] = sol.u_tilde[i][k];
    std::vector<double> psi(zg.n_cells());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < zg.n_cells(); ++i) {
      psi[i] = std::cos(kPi * zg.cell_mid(i));
      num += psi[i] * gphi[i];
      den += phi_t[i] * gphi[i];
    }
    for (std::size_t i = 0; i < zg.n_cells(); ++i)
      psi[i] -= (num / den) * phi_t[i];

    double det = 0.0;
    for (std::size_t i = 0; i < zg.n_cells(); ++i)
      det += zg.delta() * psi[i] * gphi[i];
    CHECK(std::fabs(det) < 1e-8);

    field::FieldSampler sampler(zg, {0.02}, spec);
    stats::Moments prod;
    for (std::size_t r = 0; r < 4000; ++r) {
      field::FieldSample s = sampler.draw(7171, r);
      gmc::GmcMeasure mu = gmc::gmc_from_field(s, 0, beta);
      double zv = 0.0, vv = 0.0;
      for (std::size_t i = 0; i < zg.n_cells(); ++i) {
        zv += phi_t[i] * mu.cell_mass[i];
        vv += psi[i] * mu.cell_mass[i];
      }
      push(prod, zv * vv);
    }
    CHECK(std::fabs(prod.mean()) < 4.0 * prod.std_error());
  }

  SUBCASE("a degenerate beta reduces both sides to plain quadrature") {
    GridSpec zg{1.0, 33}, tg{1.0, 33};
    ProjectedSolution sol =
        solve_projected_bvp(1e-6, 1e-6, spec, fs, bc, zg, tg);
    recover_kernel(sol, spec);
    McCheckReport rep = projected_mc_check(sol, spec, 200, 0.05, 77);
    CHECK(rep.max_abs_discrepancy < 5e-7);
  }
}

TEST_CASE("projected solutions serialize") {
  cov::CovarianceSpec spec;
  GridSpec zg{1.0, 9}, tg{1.0, 17};
  ProjectedSolution sol = solve_projected_bvp(
      0.4, 0.6, spec, ForcingSpec::zero(1.0), BoundaryData{BcKind::ivp, 0.0, 1.0},
      zg, tg);
  recover_kernel(sol, spec);

  std::ostringstream u_csv;
  write_u_tilde_csv(u_csv, sol);
  std::istringstream u_in(u_csv.str());
  std::string line;
  std::getline(u_in, line);
  CHECK(line.rfind("z,t=0,", 0) == 0);
  std::size_t rows = 0;
  while (std::getline(u_in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 17);
    rows += 1;
  }
  CHECK(rows == 8);

  std::ostringstream phi_csv;
  write_phi_csv(phi_csv, sol);
  std::istringstream phi_in(phi_csv.str());
  std::getline(phi_in, line);
  CHECK(line.rfind("t,z=", 0) == 0);
  rows = 0;
  while (std::getline(phi_in, line)) rows += 1;
  CHECK(rows == 17);

  nlohmann::json man = nlohmann::json::parse(manifest_json(sol));
  CHECK(man["beta"] == 0.4);
  CHECK(man["beta_prime"] == 0.6);
  CHECK(man["z_grid"]["n_points"] == 9);
  CHECK(man["t_grid"]["n_points"] == 17);
  CHECK(man["phi_dual_norm"].size() == 17);
}
