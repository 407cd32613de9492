#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "gmclab/chaos.hpp"
#include "gmclab/covkernel.hpp"
#include "gmclab/errors.hpp"
#include "gmclab/fieldsim.hpp"
#include "gmclab/gmc.hpp"
#include "gmclab/pressure1d.hpp"
#include "gmclab/quadrature.hpp"
#include "gmclab/rng.hpp"
#include "gmclab/stats.hpp"

using namespace gmclab;
using namespace gmclab::pressure;

namespace {

gmc::GmcMeasure lebesgue(const GridSpec& grid, double eps = 0.01) {
  gmc::GmcMeasure mu;
  mu.grid = grid;
  mu.beta = 1e-12;
  mu.eps = eps;
  mu.cell_mass.assign(grid.n_cells(), grid.delta());
  return mu;
}

field::FieldSample make_sample(const GridSpec& grid, double eps,
                               std::vector<double> values, double sigma2) {
  field::FieldSample s;
  s.grid = grid;
  s.eps_levels = {eps};
  s.values = {std::move(values)};
  s.sigma2 = {sigma2};
  return s;
}

double closed_dirichlet(const ForcingSpec& fs, double u1, double u2, double t) {
  double int_f_total =
      quad::integrate_adaptive([&](double s) { return fs.F(s); }, 0.0, fs.T, 1e-12);
  double kappa = (u2 - u1 - int_f_total) / fs.T;
  double tail = quad::integrate_adaptive([&](double s) { return fs.F(s); }, 0.0, t, 1e-12);
  return u1 + kappa * t + tail;
}

}  // namespace

TEST_CASE("forcing families expose exact antiderivatives") {
  ForcingSpec z = ForcingSpec::zero(2.0);
  CHECK(z.F(1.3) == 0.0);
  CHECK(z.total_abs() == 0.0);

  ForcingSpec c = ForcingSpec::constant(0.7, 2.0);
  CHECK(c.F(0.0) == 0.0);
  CHECK(c.F(1.5) == doctest::Approx(-1.05).epsilon(1e-15));
  CHECK(c.integral() == doctest::Approx(1.4).epsilon(1e-15));
  CHECK(c.total_abs() == doctest::Approx(1.4).epsilon(1e-15));
  CHECK(c.sup_abs_F() == doctest::Approx(1.4).epsilon(1e-15));

  ForcingSpec s = ForcingSpec::sine(1.3, 2, 1.0, 0.4);
  CHECK(s.F(0.0) == 0.0);
  for (double t : {0.17, 0.5, 0.93}) {
    double oracle =
        -quad::integrate_adaptive([&](double y) { return s.f(y); }, 0.0, t, 1e-12);
    CHECK(s.F(t) == doctest::Approx(oracle).epsilon(1e-10));
  }
  CHECK(std::fabs(s.integral()) < 1e-12);  // whole cycles integrate to zero
  double abs_oracle =
      quad::integrate_adaptive([&](double y) { return std::fabs(s.f(y)); }, 0.0, 1.0, 1e-9);
  CHECK(s.total_abs() == doctest::Approx(abs_oracle).epsilon(1e-7));
  CHECK(s.sup_abs_F() >= std::fabs(s.F(0.31)));

  ForcingSpec p = ForcingSpec::piecewise({0.0, 0.25, 0.6, 1.0}, {2.0, -1.0, 0.5});
  CHECK(p.T == 1.0);
  CHECK(p.f(0.1) == 2.0);
  CHECK(p.f(0.3) == -1.0);
  CHECK(p.f(1.0) == 0.5);
  CHECK(p.F(0.25) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(p.F(0.5) == doctest::Approx(-0.5 + 0.25).epsilon(1e-15));
  for (double t : {0.2, 0.47, 0.88}) {
    // Integrate between breakpoints so the oracle quadrature sees smooth panels.
    double oracle = 0.0, lo = 0.0;
    for (double b : {0.25, 0.6, 1.0}) {
      double hi = std::min(b, t);
      if (hi > lo)
        oracle -= quad::integrate_adaptive([&](double y) { return p.f(y); }, lo, hi, 1e-13);
      lo = hi;
      if (lo >= t) break;
    }
    CHECK(p.F(t) == doctest::Approx(oracle).epsilon(1e-9));
  }
  CHECK(p.total_abs() == doctest::Approx(2.0 * 0.25 + 1.0 * 0.35 + 0.5 * 0.4).epsilon(1e-15));
  CHECK(p.sup_abs_F() == doctest::Approx(0.5).epsilon(1e-15));

  CHECK_THROWS_AS(ForcingSpec::sine(1.0, 0, 1.0), validation_error);
  CHECK_THROWS_AS(ForcingSpec::constant(1.0, -2.0), validation_error);
  CHECK_THROWS_AS(ForcingSpec::piecewise({0.0, 0.5}, {1.0, 2.0}), validation_error);
  CHECK_THROWS_AS(ForcingSpec::piecewise({0.1, 0.5, 1.0}, {1.0, 2.0}), validation_error);
  CHECK_THROWS_AS(ForcingSpec::piecewise({0.0, 0.6, 0.5}, {1.0, 2.0}), validation_error);
}

TEST_CASE("pathwise solves reproduce closed forms on the flat measure") {
  GridSpec grid{1.0, 101};

  // IVP with f = 0 integrates the measure: U = 1 + 2 t on Lebesgue cells.
  SolutionPath u = solve_pathwise(lebesgue(grid), ForcingSpec::zero(1.0),
                                  {BcKind::ivp, 1.0, 2.0});
  CHECK(u.kappa == 2.0);
  for (std::size_t i = 0; i < u.values.size(); ++i)
    CHECK(u.values[i] == doctest::Approx(1.0 + 2.0 * grid.node(i)).epsilon(1e-12));

  ForcingSpec fs = ForcingSpec::sine(0.8, 1, 1.0);
  SolutionPath d = solve_pathwise(lebesgue(grid), fs, {BcKind::dirichlet, 0.3, -0.9});
  CHECK(d.values.front() == 0.3);
  CHECK(d.values.back() == doctest::Approx(-0.9).epsilon(1e-13));
  // Flat cells make the discrete sums a midpoint rule for the closed form.
  CHECK(d.values[50] ==
        doctest::Approx(closed_dirichlet(fs, 0.3, -0.9, 0.5)).epsilon(1e-4));

  SolutionPath per = solve_pathwise(lebesgue(grid), fs, {BcKind::periodic, 0.0, 0.0});
  CHECK(per.values.front() == 0.0);
  CHECK(std::fabs(per.values.back() - per.values.front()) < 1e-12);
  CHECK_THROWS_AS(solve_pathwise(lebesgue(grid), ForcingSpec::constant(0.4, 1.0),
                                 {BcKind::periodic, 0.0, 0.0}),
                  validation_error);

  // Neumann: compatibility pins U2 - U1 to -int f; the representative starts at 0.
  ForcingSpec fc = ForcingSpec::constant(0.7, 1.0);
  SolutionPath nm = solve_pathwise(lebesgue(grid), fc, {BcKind::neumann, 0.3, -0.4});
  CHECK(nm.values.front() == 0.0);
  CHECK(nm.kappa == 0.3);
  CHECK_THROWS_AS(solve_pathwise(lebesgue(grid), fc, {BcKind::neumann, 0.3, 0.3}),
                  validation_error);

  gmc::GmcMeasure dead;
  dead.grid = grid;
  dead.beta = 0.5;
  dead.eps = 0.01;
  dead.cell_mass.assign(grid.n_cells(), 0.0);
  CHECK_THROWS_AS(solve_pathwise(dead, fs, {BcKind::ivp, 0.0, 1.0}), numerical_error);

  ForcingSpec wrong_domain = ForcingSpec::constant(1.0, 2.0);
  CHECK_THROWS_AS(solve_pathwise(lebesgue(grid), wrong_domain, {BcKind::ivp, 0.0, 1.0}),
                  validation_error);
}

TEST_CASE("pathwise kappa and variation bounds hold on random gmc realizations") {
  GridSpec grid{1.0, 101};
  cov::CovarianceSpec spec;
  spec.T = 1.0;
  spec.beta = 0.5;
  field::FieldSampler sampler(grid, {0.02}, spec);

  // total_abs = 2 a T / pi = 1 for a = pi / 2: the paper's unit-mass forcing.
  ForcingSpec fs = ForcingSpec::sine(1.5707963267948966, 1, 1.0);
  CHECK(fs.total_abs() == doctest::Approx(1.0).epsilon(1e-14));

  for (std::uint64_t r = 0; r < 30; ++r) {
    field::FieldSample s = sampler.draw(512, r);
    gmc::GmcMeasure mu = gmc::gmc_from_field(s, 0, 0.5);
    double total = mu.total();

    SolutionPath d = solve_pathwise(mu, fs, {BcKind::dirichlet, 0.4, 1.1});
    CHECK(d.values.back() == doctest::Approx(1.1).epsilon(1e-12));
    CHECK(std::fabs(d.kappa) <=
          std::fabs(1.1 - 0.4) / total + fs.sup_abs_F() + 1e-12);
    CHECK(d.total_variation() <=
          (std::fabs(d.kappa) + fs.sup_abs_F()) * total * (1.0 + 1e-12));

    // U1 = U2 drops the bridge term: |kappa| <= sup |F| <= int |f| = 1.
    SolutionPath flat = solve_pathwise(mu, fs, {BcKind::dirichlet, 0.4, 0.4});
    CHECK(std::fabs(flat.kappa) <= 1.0 + 1e-12);

    SolutionPath per = solve_pathwise(mu, fs, {BcKind::periodic, 0.0, 0.0});
    CHECK(std::fabs(per.values.back()) < 1e-12 * (1.0 + total));
  }
}

TEST_CASE("ivp solutions match the mean value identity") {
  GridSpec grid{1.0, 101};
  cov::CovarianceSpec spec;
  spec.T = 1.0;
  spec.beta = 0.5;
  field::FieldSampler sampler(grid, {0.02}, spec);
  ForcingSpec fs = ForcingSpec::sine(1.2, 1, 1.0);

  const std::size_t reps = 4000;
  stats::Moments at25, at50, at100;
  for (std::uint64_t r = 0; r < reps; ++r) {
    field::FieldSample s = sampler.draw(99, r);
    SolutionPath u = solve_pathwise(gmc::gmc_from_field(s, 0, 0.5), fs,
                                    {BcKind::ivp, 1.0, 2.0});
    auto push = [](stats::Moments& m, double v) {
      m.n += 1;
      m.sum += v;
      m.sum_sq += v * v;
      m.min = std::min(m.min, v);
      m.max = std::max(m.max, v);
    };
    push(at25, u.values[25]);
    push(at50, u.values[50]);
    push(at100, u.values[100]);
  }

  // E[dmu] = ds, so E[U(t)] = U1 + int_0^t (U2 + F(s)) ds.
  auto expected = [&](double t) {
    return 1.0 + quad::integrate_adaptive(
                     [&](double s) { return 2.0 + fs.F(s); }, 0.0, t, 1e-12);
  };
  CHECK(std::fabs(at25.mean() - expected(0.25)) < 4.0 * at25.std_error());
  CHECK(std::fabs(at50.mean() - expected(0.5)) < 4.0 * at50.std_error());
  CHECK(std::fabs(at100.mean() - expected(1.0)) < 4.0 * at100.std_error());
}

TEST_CASE("the smoothed equation residual decays under grid refinement") {
  const double eps = 0.1, beta = 0.5;
  GridSpec fine{1.0, 161}, coarse{1.0, 41};
  cov::CovarianceSpec spec;
  spec.T = 1.0;
  spec.beta = beta;
  field::FieldSampler sampler(fine, {eps}, spec);
  ForcingSpec fs = ForcingSpec::constant(0.7, 1.0);
  BoundaryData bc{BcKind::ivp, 1.0, 2.0};

  std::vector<double> orders;
  for (std::uint64_t r = 0; r < 5; ++r) {
    field::FieldSample sf = sampler.draw(2718, r);
    SolutionPath uf = solve_pathwise(gmc::gmc_from_field(sf, 0, beta), fs, bc);
    ResidualReport rf = verify_pathwise_ode(uf, sf, 0, fs);

    // The same realization on every fourth node: nested-grid refinement well
    // inside the smoothing scale, where the spacing dominates the residual.
    std::vector<double> sub;
    for (std::size_t i = 0; i < sf.values[0].size(); i += 4)
      sub.push_back(sf.values[0][i]);
    field::FieldSample sc = make_sample(coarse, eps, std::move(sub), sf.sigma2[0]);
    SolutionPath uc = solve_pathwise(gmc::gmc_from_field(sc, 0, beta), fs, bc);
    ResidualReport rc = verify_pathwise_ode(uc, sc, 0, fs);

    CHECK(rf.n_interior == 157);
    orders.push_back(residual_decay_order({coarse.delta(), fine.delta()},
                                          {rc.max_abs, rf.max_abs}));
  }
  std::sort(orders.begin(), orders.end());
  CHECK(orders[2] > 0.8);  // median at least first order

  // Degenerate field: the residual is the centered discretization error of
  // -U'' = f, second order in the spacing.
  ForcingSpec fsine = ForcingSpec::sine(1.0, 1, 1.0);
  auto deterministic = [&](const GridSpec& g) {
    field::FieldSample s =
        make_sample(g, eps, std::vector<double>(g.n_points, 0.0), 2.0);
    SolutionPath u =
        solve_pathwise(gmc::gmc_from_field(s, 0, 1e-12), fsine, bc);
    return verify_pathwise_ode(u, s, 0, fsine).max_abs;
  };
  double r81 = deterministic(GridSpec{1.0, 81});
  double r161 = deterministic(GridSpec{1.0, 161});
  double order = residual_decay_order({GridSpec{1.0, 81}.delta(),
                                       GridSpec{1.0, 161}.delta()},
                                      {r81, r161});
  CHECK(order == doctest::Approx(2.0).epsilon(0.15));

  // Neumann data reproduction: the discrete flux at 0 is exactly kappa +
  // F(first midpoint), so it matches U1 up to half a cell of forcing.
  field::FieldSample sf = sampler.draw(2718, 11);
  ForcingSpec fc = ForcingSpec::constant(0.7, 1.0);
  SolutionPath nm = solve_pathwise(gmc::gmc_from_field(sf, 0, beta), fc,
                                   {BcKind::neumann, 0.3, -0.4});
  double s2 = sf.sigma2[0];
  double du0 = (nm.values[1] - nm.values[0]) / fine.delta();
  double flux = std::exp(beta * beta * s2) *
                std::exp(-beta * sf.values[0][0] - 0.5 * beta * beta * s2) * du0;
  CHECK(std::fabs(flux - 0.3) <= 0.7 * fine.delta() * 0.5 + 1e-12);

  // Provenance mismatches are arguments errors.
  SolutionPath uf = solve_pathwise(gmc::gmc_from_field(sf, 0, beta), fs, bc);
  uf.eps = 0.99;
  CHECK_THROWS_AS(verify_pathwise_ode(uf, sf, 0, fs), validation_error);
  CHECK_THROWS_AS(verify_pathwise_ode(uf, sf, 3, fs), validation_error);
}

TEST_CASE("the deterministic s side solver reduces to the two point problem") {
  GridSpec grid{1.0, 401};
  std::vector<double> zero_profile(grid.n_points, 0.0);
  ForcingSpec fs = ForcingSpec::sine(0.9, 1, 1.0, 0.3);

  double kappa = 0.0;
  std::vector<double> u =
      solve_s_side(grid, zero_profile, fs, {BcKind::dirichlet, 0.2, 0.7}, &kappa);
  CHECK(u.front() == 0.2);
  CHECK(u.back() == doctest::Approx(0.7).epsilon(1e-13));
  // Flat weights make the cumulative sums a midpoint rule: O(delta^2).
  CHECK(u[200] == doctest::Approx(closed_dirichlet(fs, 0.2, 0.7, 0.5)).epsilon(1e-5));

  std::vector<double> v =
      solve_s_side(grid, zero_profile, fs, {BcKind::ivp, 1.0, 2.0});
  double want = 1.0 + quad::integrate_adaptive(
                          [&](double s) { return 2.0 + fs.F(s); }, 0.0, 0.5, 1e-12);
  CHECK(v[200] == doctest::Approx(want).epsilon(1e-6));

  CHECK_THROWS_AS(solve_s_side(grid, {0.0, 0.0}, fs, {BcKind::ivp, 0.0, 1.0}),
                  validation_error);
}

TEST_CASE("chaos fields keep the dominant covariance directions") {
  cov::CovarianceSpec spec;
  spec.T = 1.0;
  spec.beta = 0.5;

  // Full rank on a tiny grid: nothing discarded, loadings rebuild the matrix.
  GridSpec grid{1.0, 5};
  ChaosField full = chaos_field_from_covariance(grid, spec, 0.25, 5);
  CHECK(full.n_vars == 5);
  CHECK(full.discarded_variance < 1e-12);
  cov::CovEvaluator ev(spec, 1e-11);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      double rebuilt = 0.0;
      for (std::size_t k = 0; k < full.n_vars; ++k)
        rebuilt += full.loadings[i][k] * full.loadings[j][k];
      double want = ev.cov(grid.node(i), grid.node(j), 0.25, 0.25).value;
      CHECK(rebuilt == doctest::Approx(want).epsilon(1e-9));
    }
  }
  CHECK(full.sigma2[2] == doctest::Approx(ev.variance(0.25)).epsilon(1e-9));

  // Strong smoothing concentrates the spectrum: few directions suffice.
  ChaosField autop = chaos_field_from_covariance(GridSpec{1.0, 21}, spec, 0.5, 0);
  CHECK(autop.n_vars <= 6);
  CHECK(autop.discarded_variance <= 0.05);

  CHECK_THROWS_AS(chaos_field_from_covariance(grid, spec, 0.25, 9), validation_error);
  CHECK_THROWS_AS(chaos_field_from_covariance(grid, spec, -0.1, 2), validation_error);
}

TEST_CASE("wick chaos solutions collapse to pathwise for scalar kappa") {
  cov::CovarianceSpec spec;
  spec.T = 1.0;
  spec.beta = 0.5;
  GridSpec grid{1.0, 5};
  ChaosField cf = chaos_field_from_covariance(grid, spec, 0.25, 5);
  ForcingSpec fs = ForcingSpec::sine(0.6, 1, 1.0);
  BoundaryData bc{BcKind::ivp, 1.0, 2.0};

  ChaosSolution wick = solve_wick_chaos(cf, fs, bc, 10);
  CHECK(wick.kappa.coeffs.size() == 1);
  CHECK(wick.kappa.coeff(chaos::MultiIndex{}) == 2.0);

  rng::NormalStream draws(515151, 0);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> xi(5);
    for (double& v : xi) v = draws.normal();

    // The same realization for the pathwise solver: X = L xi.
    std::vector<double> x(5, 0.0);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t k = 0; k < 5; ++k) x[i] += cf.loadings[i][k] * xi[k];
    // One field, one variance table: compare on matched normalization.
    field::FieldSample s = make_sample(grid, 0.25, x, cf.sigma2[0]);
    SolutionPath u = solve_pathwise(gmc::gmc_from_field(s, 0, 0.5), fs, bc);

    for (std::size_t i = 0; i < u.values.size(); ++i) {
      double chaos_val = chaos::evaluate(wick.values[i], xi);
      CHECK(std::fabs(chaos_val - u.values[i]) < 2e-3 * (1.0 + std::fabs(u.values[i])));
    }
  }
}

TEST_CASE("wick chaos dirichlet matches hand algebra on a constant field") {
  const double sigma = 0.4;
  ChaosField cf;
  cf.grid = GridSpec{1.0, 2};
  cf.beta = 1.0;
  cf.eps = 0.1;
  cf.n_vars = 1;
  cf.loadings = {{sigma}, {sigma}};
  cf.sigma2 = {sigma * sigma, sigma * sigma};

  ChaosSolution sol = solve_wick_chaos(cf, ForcingSpec::zero(1.0),
                                       {BcKind::dirichlet, 0.2, 1.0}, 12);

  // With one cell of unit length, int e^{wick X} ds = e^{wick sigma xi} and
  // its Wick inverse is e^{wick(-sigma xi)}; kappa = (U2-U1) e^{wick(-sigma xi)}.
  chaos::ChaosExpansion minus =
      chaos::wick_exp(chaos::GaussianPoint{{sigma}, -1.0}, 12);
  for (const auto& [a, c] : sol.kappa.coeffs)
    CHECK(c == doctest::Approx(0.8 * minus.coeff(a)).epsilon(1e-12).scale(1.0));

  CHECK(sol.values[1].coeff(chaos::MultiIndex{}) == doctest::Approx(1.0).epsilon(1e-10));
  for (const auto& [a, c] : sol.values[1].coeffs) {
    if (a.degree() > 0) CHECK(std::fabs(c) < 1e-10);
  }

  // Pointwise shadow of e^{wick(-X)} = 1 / (e^{E[X^2]} e^{wick X}).
  chaos::ChaosExpansion plus = chaos::wick_exp(chaos::GaussianPoint{{sigma}, 1.0}, 12);
  for (double xi : {-1.2, 0.3, 2.0}) {
    double lhs = chaos::evaluate(minus, {xi});
    double rhs = 1.0 / (std::exp(sigma * sigma) * chaos::evaluate(plus, {xi}));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
  }
}

TEST_CASE("s transforms of chaos solutions match the deterministic side") {
  cov::CovarianceSpec spec;
  spec.T = 1.0;
  spec.beta = 0.5;
  GridSpec grid{1.0, 9};
  ChaosField cf = chaos_field_from_covariance(grid, spec, 0.25, 3);
  ForcingSpec fs = ForcingSpec::sine(0.8, 1, 1.0);

  rng::NormalStream pts(8080, 0);
  for (BcKind kind : {BcKind::ivp, BcKind::dirichlet}) {
    BoundaryData bc{kind, 0.5, 1.5};
    ChaosSolution wick = solve_wick_chaos(cf, fs, bc, 10);

    for (int t = 0; t < 20; ++t) {
      chaos::GaussianPoint pt{{pts.normal(), pts.normal(), pts.normal()}, 0.2};
      std::vector<double> b = pt.loaded();

      std::vector<double> profile(grid.n_points, 0.0);
      for (std::size_t i = 0; i < profile.size(); ++i)
        for (std::size_t k = 0; k < cf.n_vars; ++k)
          profile[i] += cf.beta * cf.loadings[i][k] * b[k];

      double kappa_h = 0.0;
      std::vector<double> uh = solve_s_side(grid, profile, fs, bc, &kappa_h);

      // Scalar kappa transforms exactly; the Dirichlet kappa pays the
      // truncated tail of the Wick inverse at degree > 10.
      double tol = kind == BcKind::ivp ? 1e-9 : 1e-5;
      CHECK(std::fabs(chaos::s_transform(wick.kappa, pt) - kappa_h) < tol);
      for (std::size_t i = 0; i < uh.size(); ++i)
        CHECK(std::fabs(chaos::s_transform(wick.values[i], pt) - uh[i]) < tol);
    }
  }

  // Multiplicativity shadow of the Dirichlet kappa identity:
  // S kappa * S int e^{wick X} = (U2 - U1) - S int F e^{wick X}.
  BoundaryData bc{BcKind::dirichlet, 0.5, 1.5};
  ChaosSolution wick = solve_wick_chaos(cf, fs, bc, 10);
  const double delta = grid.delta();
  for (int t = 0; t < 20; ++t) {
    chaos::GaussianPoint pt{{pts.normal(), pts.normal(), pts.normal()}, 0.2};
    std::vector<double> b = pt.loaded();
    double s_total = 0.0, s_forced = 0.0;
    for (std::size_t j = 0; j + 1 < static_cast<std::size_t>(grid.n_points); ++j) {
      double c = 0.0;
      for (std::size_t k = 0; k < cf.n_vars; ++k)
        c += cf.beta * cf.loadings[j][k] * b[k];
      s_total += std::exp(c) * delta;
      s_forced += fs.F(grid.cell_mid(j)) * std::exp(c) * delta;
    }
    double lhs = chaos::s_transform(wick.kappa, pt) * s_total;
    CHECK(std::fabs(lhs - (1.0 - s_forced)) < 1e-5);
  }
}

TEST_CASE("coupled solutions contract in the ky fan metric") {
  cov::CovarianceSpec spec;
  spec.T = 1.0;
  spec.beta = 0.5;
  GridSpec grid{1.0, 201};
  ForcingSpec fs = ForcingSpec::sine(1.0, 1, 1.0);
  BoundaryData bc{BcKind::dirichlet, 0.0, 1.0};

  ConvergenceReport rep =
      convergence_study(spec, grid, {0.04, 0.02, 0.01}, fs, bc, 2000, 314);
  CHECK(rep.ky_fan.size() == 2);
  CHECK(rep.ky_fan[0] > rep.ky_fan[1]);
  CHECK(rep.ky_fan[1] > 0.0);
  CHECK(rep.monotone);

  nlohmann::json j = nlohmann::json::parse(rep.to_json());
  CHECK(j["eps"].size() == 3);
  CHECK(j["ky_fan"].size() == 2);
  CHECK(j["monotone"].get<bool>());
  CHECK(j["replicates"].get<std::size_t>() == 2000);

  // Degenerate beta: the coupled paths coincide up to rounding.
  cov::CovarianceSpec flat = spec;
  flat.beta = 1e-12;
  ConvergenceReport det =
      convergence_study(flat, grid, {0.04, 0.02}, fs, bc, 400, 314);
  CHECK(det.ky_fan[0] < 1e-9);

  CHECK_THROWS_AS(convergence_study(spec, grid, {0.02, 0.04}, fs, bc, 100, 1),
                  validation_error);
  CHECK_THROWS_AS(convergence_study(spec, grid, {0.04, 0.02}, fs, bc, 5, 1),
                  validation_error);
}

TEST_CASE("solution distributions agree across mollifier families") {
  GridSpec grid{1.0, 401};
  ForcingSpec fs = ForcingSpec::sine(1.0, 1, 1.0);
  BoundaryData bc{BcKind::dirichlet, 0.0, 1.0};
  const std::size_t reps = 800;

  auto mid_values = [&](const cov::Mollifier& mollifier, std::uint64_t seed) {
    cov::CovarianceSpec spec;
    spec.T = 1.0;
    spec.beta = 0.5;
    spec.mollifier = mollifier;
    field::FieldSampler sampler(grid, {0.005}, spec);
    std::vector<double> out;
    out.reserve(reps);
    for (std::uint64_t r = 0; r < reps; ++r) {
      field::FieldSample s = sampler.draw(seed, r);
      SolutionPath u = solve_pathwise(gmc::gmc_from_field(s, 0, 0.5), fs, bc);
      out.push_back(u.values[200]);
    }
    return out;
  };

  std::vector<double> bump = mid_values(cov::Mollifier::bump_selfconvolution(), 41);
  std::vector<double> gauss = mid_values(cov::Mollifier::truncated_gaussian(), 42);
  double d = stats::ks_statistic(bump, gauss);
  CHECK(d < stats::ks_critical(0.01, reps, reps));
}

TEST_CASE("solutions serialize to csv and json") {
  GridSpec grid{1.0, 5};
  SolutionPath u = solve_pathwise(lebesgue(grid), ForcingSpec::zero(1.0),
                                  {BcKind::ivp, 1.0, 2.0});
  std::ostringstream os;
  write_solution_csv(os, u);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "t,value");
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    auto comma = line.find(',');
    double t = std::strtod(line.substr(0, comma).c_str(), nullptr);
    double v = std::strtod(line.substr(comma + 1).c_str(), nullptr);
    CHECK(v == doctest::Approx(1.0 + 2.0 * t).epsilon(1e-12));
  }
  CHECK(rows == 5);

  ChaosField cf;
  cf.grid = GridSpec{1.0, 3};
  cf.beta = 0.5;
  cf.eps = 0.1;
  cf.n_vars = 1;
  cf.loadings = {{0.3}, {0.3}, {0.3}};
  cf.sigma2 = {0.09, 0.09, 0.09};
  ChaosSolution wick = solve_wick_chaos(cf, ForcingSpec::zero(1.0),
                                        {BcKind::ivp, 1.0, 2.0}, 6);
  std::ostringstream js;
  write_chaos_solution_json(js, wick);
  nlohmann::json j = nlohmann::json::parse(js.str());
  CHECK(j["grid"]["n_points"].get<int>() == 3);
  CHECK(j["bc"]["kind"].get<std::string>() == "ivp");
  CHECK(j["values"].size() == 3);
  CHECK(j["kappa"]["n_vars"].get<int>() == 1);
  chaos::ChaosExpansion back = chaos::ChaosExpansion::from_json(j["values"][2].dump());
  CHECK(back.coeff(chaos::MultiIndex{}) ==
        doctest::Approx(wick.values[2].coeff(chaos::MultiIndex{})).epsilon(1e-15));
}
