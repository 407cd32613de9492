#include "gmclab/acceptance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>

#include "gmclab/chaos.hpp"
#include "gmclab/covkernel.hpp"
#include "gmclab/fieldsim.hpp"
#include "gmclab/gmc.hpp"
#include "gmclab/grid.hpp"
#include "gmclab/harness.hpp"
#include "gmclab/potential.hpp"
#include "gmclab/pressure1d.hpp"
#include "gmclab/projection.hpp"
#include "gmclab/quadrature.hpp"
#include "gmclab/rng.hpp"
#include "gmclab/stats.hpp"

namespace gmclab::acceptance {

namespace {

namespace fs = std::filesystem;
using pressure::BcKind;
using pressure::BoundaryData;
using pressure::ForcingSpec;

constexpr double kPi = 3.14159265358979323846;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

cov::CovarianceSpec plain_spec(double beta) {
  cov::CovarianceSpec spec;
  spec.T = 1.0;
  spec.beta = beta;
  return spec;
}

// Gentle even bump; harsh nondegeneracy tables make exp(alpha h) span many
// decades and drown quadrature checks in conditioning.
cov::HTable mild_h() {
  std::vector<double> values(2049);
  for (std::size_t i = 0; i < values.size(); ++i) {
    double u = -1.0 + 2.0 * static_cast<double>(i) / 2048.0;
    values[i] = 0.25 * (1.0 + std::cos(kPi * u));
  }
  return cov::HTable::from_table(0.9, std::move(values));
}

void moments_push(stats::Moments& m, double v) {
  m.n += 1;
  m.sum += v;
  m.sum_sq += v * v;
  m.min = std::min(m.min, v);
  m.max = std::max(m.max, v);
}

// The transported solution recomputed independently: refine-fold subcell
// product integration for the indicator and forced potentials, then the same
// per-bc constants.
std::vector<double> oracle_transport(double z, const GridSpec& tg, double beta,
                                     double beta_prime, const cov::CovarianceSpec& spec,
                                     const ForcingSpec& forcing, const BoundaryData& bc,
                                     int refine) {
  const double alpha = beta * beta_prime;
  const double d = tg.delta();
  std::vector<double> ind(tg.n_points, 0.0), forced(tg.n_points, 0.0);
  for (std::size_t i = 1; i < tg.n_points; ++i) {
    double wi = 0.0, fi = 0.0;
    for (int r = 0; r < refine; ++r) {
      double a = tg.node(i - 1) + d * static_cast<double>(r) / refine;
      double b = a + d / refine;
      double m = 0.5 * (a + b);
      double lift = spec.h.is_zero() ? 1.0 : std::exp(alpha * spec.h(z - m));
      double w = quad::power_cell_integral(z, a, b, alpha) * lift;
      wi += w;
      fi += forcing.F(m) * w;
    }
    ind[i] = ind[i - 1] + wi;
    forced[i] = forced[i - 1] + fi;
  }
  double u0 = 0.0, slope = 0.0;
  switch (bc.kind) {
    case BcKind::ivp:
      u0 = bc.u1;
      slope = bc.u2;
      break;
    case BcKind::dirichlet:
      u0 = bc.u1;
      slope = (bc.u2 - bc.u1 - forced.back()) / ind.back();
      break;
    case BcKind::neumann:
      u0 = 0.0;
      slope = bc.u1;
      break;
    case BcKind::periodic:
      u0 = 0.0;
      slope = -forced.back() / ind.back();
      break;
  }
  std::vector<double> u(tg.n_points);
  for (std::size_t i = 0; i < tg.n_points; ++i) u[i] = u0 + slope * ind[i] + forced[i];
  return u;
}

// Double integral int int psi(z) phi(y) |z-y|^{-alpha} e^{alpha h(z-y)} dy dz
// with psi, phi given at cell midpoints: refined outer midpoints, exact inner
// power integrals.
double cross_moment(const std::vector<double>& psi, const std::vector<double>& phi,
                    double alpha, const GridSpec& g, const cov::CovarianceSpec& spec,
                    int refine) {
  const double d = g.delta();
  double total = 0.0;
  for (std::size_t zc = 0; zc < g.n_cells(); ++zc) {
    for (int rz = 0; rz < refine; ++rz) {
      double za = g.node(zc) + d * static_cast<double>(rz) / refine;
      double zb = za + d / refine;
      double zm = 0.5 * (za + zb);
      double inner = 0.0;
      for (std::size_t yc = 0; yc < g.n_cells(); ++yc) {
        double acc = 0.0;
        for (int ry = 0; ry < refine; ++ry) {
          double ya = g.node(yc) + d * static_cast<double>(ry) / refine;
          double yb = ya + d / refine;
          double ym = 0.5 * (ya + yb);
          double lift = spec.h.is_zero() ? 1.0 : std::exp(alpha * spec.h(zm - ym));
          acc += quad::power_cell_integral(zm, ya, yb, alpha) * lift;
        }
        inner += phi[yc] * acc;
      }
      total += psi[zc] * (zb - za) * inner;
    }
  }
  return total;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

CriterionResult gmc_mean_and_second_moment(CriterionResult& second) {
  CriterionResult mean_res{"gmc-mean", false, ""};
  second = {"gmc-second-moment", false, ""};

  const GridSpec grid{1.0, 401};
  const double eps = 0.005;
  const std::vector<double> betas{0.3, 0.5, 0.7};
  cov::CovarianceSpec spec = plain_spec(0.5);
  field::FieldSampler sampler(grid, {eps}, spec);

  const std::size_t reps = 10000;
  std::vector<stats::Moments> mass(betas.size());
  stats::Moments sq;
  for (std::size_t r = 0; r < reps; ++r) {
    field::FieldSample s = sampler.draw(20260815, r);
    for (std::size_t b = 0; b < betas.size(); ++b) {
      double m = gmc::gmc_from_field(s, 0, betas[b]).total();
      moments_push(mass[b], m);
      if (betas[b] == 0.5) moments_push(sq, m * m);
    }
  }

  double worst_se = 0.0;
  for (std::size_t b = 0; b < betas.size(); ++b)
    worst_se = std::max(worst_se, std::fabs(mass[b].mean() - 1.0) / mass[b].std_error());
  mean_res.passed = worst_se <= 3.0;
  mean_res.detail = "worst |mean-1| = " + num(worst_se) + " SE over beta {0.3,0.5,0.7}, " +
                    std::to_string(reps) + " replicates at eps " + num(eps);

  const double target = 2.0 / ((1.0 - 0.25) * (2.0 - 0.25));
  double rel = std::fabs(sq.mean() - target) / target;
  second.passed = rel <= 0.05;
  second.detail = "E[mass^2] = " + num(sq.mean()) + " vs " + num(target) +
                  " (rel err " + num(rel) + ", tol 0.05)";
  return mean_res;
}

CriterionResult negative_moments() {
  CriterionResult res{"gmc-negative-moments", false, ""};
  const GridSpec grid{1.0, 401};
  cov::CovarianceSpec spec = plain_spec(0.5);

  gmc::KahaneReport k1 =
      gmc::kahane_negative_moment_check(spec, grid, 0.5, 0.02, 0.01, -1.0, 2000, 3111);
  gmc::KahaneReport k2 =
      gmc::kahane_negative_moment_check(spec, grid, 0.5, 0.01, 0.005, -1.0, 2000, 3222);

  double worst_width = 0.0;
  for (const gmc::MomentReport* r : {&k1.coarse, &k1.fine, &k2.coarse, &k2.fine}) {
    double width = (r->ci_high - r->ci_low) / r->estimate;
    worst_width = std::max(worst_width, width);
  }
  res.passed = worst_width < 0.10 && k1.ordering_holds && k2.ordering_holds;
  res.detail = "worst CI width " + num(worst_width) + " of estimate, ordering " +
               (k1.ordering_holds && k2.ordering_holds ? "holds" : "violated") +
               " across eps {0.02,0.01,0.005}";
  return res;
}

CriterionResult dirichlet_exactness() {
  CriterionResult res{"pathwise-dirichlet-exactness", false, ""};
  const GridSpec grid{1.0, 257};
  cov::CovarianceSpec spec = plain_spec(0.6);
  field::FieldSampler sampler(grid, {0.02}, spec);
  ForcingSpec fsp = ForcingSpec::sine(1.3, 2, 1.0);
  const BoundaryData pinned{BcKind::dirichlet, 0.3, -0.7};
  const BoundaryData flat{BcKind::dirichlet, 0.4, 0.4};

  double worst_end = 0.0, worst_kappa_slack = -1e300;
  const double bound = fsp.total_abs();
  for (std::size_t r = 0; r < 100; ++r) {
    field::FieldSample s = sampler.draw(41414, r);
    gmc::GmcMeasure mu = gmc::gmc_from_field(s, 0, 0.6);
    pressure::SolutionPath u = pressure::solve_pathwise(mu, fsp, pinned);
    worst_end = std::max(
        worst_end, std::fabs(u.values.back() - pinned.u2) / std::max(1.0, std::fabs(pinned.u2)));
    pressure::SolutionPath v = pressure::solve_pathwise(mu, fsp, flat);
    worst_kappa_slack = std::max(worst_kappa_slack, std::fabs(v.kappa) - bound);
  }
  res.passed = worst_end <= 1e-12 && worst_kappa_slack <= 1e-12;
  res.detail = "endpoint rel err " + num(worst_end) + ", |kappa| - int|f| <= " +
               num(worst_kappa_slack) + " on 100 realizations";
  return res;
}

CriterionResult residual_decay() {
  CriterionResult res{"pathwise-residual-decay", false, ""};
  cov::CovarianceSpec spec = plain_spec(0.5);
  ForcingSpec fsp = ForcingSpec::sine(0.9, 1, 1.0);
  const BoundaryData bc{BcKind::ivp, 0.0, 1.0};

  std::vector<double> deltas, max_res;
  for (std::size_t n : {513u, 1025u, 2049u}) {
    GridSpec grid{1.0, n};
    field::FieldSampler sampler(grid, {0.02}, spec);
    stats::Moments m;
    for (std::size_t r = 0; r < 20; ++r) {
      field::FieldSample s = sampler.draw(50505, r);
      pressure::SolutionPath u =
          pressure::solve_pathwise(gmc::gmc_from_field(s, 0, 0.5), fsp, bc);
      moments_push(m, pressure::verify_pathwise_ode(u, s, 0, fsp).max_abs);
    }
    deltas.push_back(grid.delta());
    max_res.push_back(m.mean());
  }
  double order = pressure::residual_decay_order(deltas, max_res);
  bool decreasing = max_res[1] < max_res[0] && max_res[2] < max_res[1];
  res.passed = order >= 1.0 && decreasing;
  res.detail = "fitted order " + num(order) + ", mean max residuals {" + num(max_res[0]) +
               ", " + num(max_res[1]) + ", " + num(max_res[2]) + "} at eps 0.02";
  return res;
}

CriterionResult eps_convergence() {
  CriterionResult res{"eps-convergence", false, ""};
  cov::CovarianceSpec spec = plain_spec(0.5);
  const GridSpec grid{1.0, 201};
  const std::vector<double> schedule{0.04, 0.02, 0.01};
  ForcingSpec fsp = ForcingSpec::sine(1.0, 2, 1.0);

  pressure::ConvergenceReport dir = pressure::convergence_study(
      spec, grid, schedule, fsp, BoundaryData{BcKind::dirichlet, 0.2, 1.0}, 2000, 616);
  pressure::ConvergenceReport per = pressure::convergence_study(
      spec, grid, schedule, fsp, BoundaryData{BcKind::periodic, 0.0, 0.0}, 2000, 717);
  bool dir_dec = dir.ky_fan.size() == 2 && dir.ky_fan[1] < dir.ky_fan[0];
  bool per_dec = per.ky_fan.size() == 2 && per.ky_fan[1] < per.ky_fan[0];

  const GridSpec fine{1.0, 401};
  cov::CovarianceSpec swap = spec;
  swap.mollifier = cov::Mollifier::truncated_gaussian();
  field::FieldSampler sa(fine, {0.005}, spec);
  field::FieldSampler sb(fine, {0.005}, swap);
  std::vector<double> ma(800), mb(800);
  for (std::size_t r = 0; r < 800; ++r) {
    ma[r] = gmc::gmc_from_field(sa.draw(818, r), 0, 0.5).total();
    mb[r] = gmc::gmc_from_field(sb.draw(919, r), 0, 0.5).total();
  }
  harness::KsReport ks = harness::ks_compare(ma, mb, 0.01);

  res.passed = dir_dec && per_dec && !ks.rejected;
  res.detail = "ky fan dirichlet {" + num(dir.ky_fan[0]) + ", " + num(dir.ky_fan[1]) +
               "}, periodic {" + num(per.ky_fan[0]) + ", " + num(per.ky_fan[1]) +
               "}, mollifier KS " + num(ks.statistic) + " vs " + num(ks.critical);
  return res;
}

CriterionResult wick_algebra() {
  CriterionResult res{"wick-algebra", false, ""};
  rng::NormalStream rs(70707, 0);
  auto random_expansion = [&](std::size_t n_vars, std::size_t max_deg, std::size_t cap) {
    chaos::ChaosExpansion f = chaos::ChaosExpansion::constant(n_vars, 2.0 * rs.uniform() - 1.0, cap);
    for (const auto& a : chaos::all_indices(n_vars, max_deg))
      if (a.degree() > 0 && rs.uniform() < 0.5) f.set(a, 2.0 * rs.uniform() - 1.0);
    return f;
  };

  double worst_conv = 0.0, worst_s = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 1 + static_cast<std::size_t>(rs.raw() % 4);
    chaos::ChaosExpansion f = random_expansion(n, 3, 6);
    chaos::ChaosExpansion g = random_expansion(n, 3, 6);
    chaos::ChaosExpansion fg = chaos::wick_mul(f, g, 6);

    // Projection oracle: the coefficient of H_gamma is the convolution over
    // all splits, accumulated here by brute force over term pairs.
    std::map<chaos::MultiIndex, double> oracle;
    for (const auto& [a, fa] : f.coeffs)
      for (const auto& [b, gb] : g.coeffs) {
        chaos::MultiIndex sum = a.plus(b);
        if (sum.degree() <= 6) oracle[sum] += fa * gb;
      }
    for (const auto& [a, v] : oracle)
      worst_conv = std::max(worst_conv, std::fabs(fg.coeff(a) - v));
    for (const auto& [a, v] : fg.coeffs) {
      auto it = oracle.find(a);
      worst_conv = std::max(worst_conv, std::fabs(v - (it == oracle.end() ? 0.0 : it->second)));
    }

    chaos::GaussianPoint pt;
    pt.coeffs.resize(n);
    for (double& c : pt.coeffs) c = rs.normal();
    pt.lambda = 0.3;
    worst_s = std::max(worst_s, std::fabs(chaos::s_transform(fg, pt) -
                                          chaos::s_transform(f, pt) * chaos::s_transform(g, pt)));
  }

  double worst_round = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 1 + static_cast<std::size_t>(rs.raw() % 3);
    chaos::ChaosExpansion f = chaos::ChaosExpansion::constant(n, 1.0, 12);
    for (const auto& a : chaos::all_indices(n, 2))
      if (a.degree() > 0 && rs.uniform() < 0.6) f.set(a, 0.3 * (2.0 * rs.uniform() - 1.0));
    chaos::WickInverseResult inv = chaos::wick_inverse(f, 12);
    chaos::ChaosExpansion round = chaos::wick_mul(f, inv.inverse, 12);
    for (const auto& [a, v] : round.coeffs)
      worst_round = std::max(worst_round, std::fabs(v - (a.degree() == 0 ? 1.0 : 0.0)));
  }

  chaos::ChaosExpansion lin = chaos::ChaosExpansion::constant(1, 1.0, 12);
  lin.set(chaos::MultiIndex::unit(0), 0.5);
  chaos::WickInverseResult series = chaos::wick_inverse(lin, 12);
  bool geometric_exact = true;
  double expect = 1.0;
  for (int k = 0; k <= 12; ++k) {
    std::vector<std::uint8_t> e(1, static_cast<std::uint8_t>(k));
    if (series.inverse.coeff(chaos::MultiIndex{e}) != expect) geometric_exact = false;
    expect *= -0.5;
  }

  chaos::ChaosExpansion steep = chaos::ChaosExpansion::constant(1, 1.0, 12);
  steep.set(chaos::MultiIndex::unit(0), 1.2);
  bool divergent_flagged = chaos::wick_inverse(steep, 12).l2_divergent;

  res.passed = worst_conv <= 1e-10 && worst_s <= 1e-12 && worst_round <= 1e-10 &&
               geometric_exact && divergent_flagged;
  res.detail = "oracle gap " + num(worst_conv) + ", Smult gap " + num(worst_s) +
               ", inverse round trip " + num(worst_round) + ", geometric series " +
               (geometric_exact ? "exact" : "off") + ", steep coefficient " +
               (divergent_flagged ? "flagged divergent" : "not flagged");
  return res;
}

CriterionResult wick_pathwise_match() {
  CriterionResult res{"wick-pathwise-match", false, ""};
  cov::CovarianceSpec spec = plain_spec(0.3);
  const GridSpec grid{1.0, 17};
  const double eps = 0.5;
  const double beta = 0.3;
  pressure::ChaosField cf = pressure::chaos_field_from_covariance(grid, spec, eps, 0);
  ForcingSpec fsp = ForcingSpec::sine(0.7, 1, 1.0);
  const BoundaryData ivp{BcKind::ivp, 0.5, 1.5};
  const BoundaryData neu{BcKind::neumann, 0.3, 0.3};
  pressure::ChaosSolution wick_ivp = pressure::solve_wick_chaos(cf, fsp, ivp, 12);
  pressure::ChaosSolution wick_neu = pressure::solve_wick_chaos(cf, fsp, neu, 12);

  double worst = 0.0;
  rng::NormalStream draws(808080, 0);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> xi(cf.n_vars);
    for (double& v : xi) v = draws.normal();
    gmc::GmcMeasure mu;
    mu.grid = grid;
    mu.beta = beta;
    mu.eps = eps;
    mu.cell_mass.resize(grid.n_cells());
    for (std::size_t i = 0; i < grid.n_cells(); ++i) {
      double x = 0.0;
      for (std::size_t k = 0; k < cf.n_vars; ++k) x += cf.loadings[i][k] * xi[k];
      mu.cell_mass[i] = std::exp(beta * x - 0.5 * beta * beta * cf.sigma2[i]) * grid.delta();
    }
    pressure::SolutionPath up = pressure::solve_pathwise(mu, fsp, ivp);
    pressure::SolutionPath un = pressure::solve_pathwise(mu, fsp, neu);
    for (std::size_t i = 0; i < grid.n_points; ++i) {
      worst = std::max(worst, std::fabs(chaos::evaluate(wick_ivp.values[i], xi) - up.values[i]));
      worst = std::max(worst, std::fabs(chaos::evaluate(wick_neu.values[i], xi) - un.values[i]));
    }
  }
  res.passed = worst < 1e-6 && cf.discarded_variance <= 0.05;
  res.detail = "sup gap " + num(worst) + " over 100 coupled realizations, " +
               std::to_string(cf.n_vars) + " vars, discarded variance " +
               num(cf.discarded_variance);
  return res;
}

CriterionResult wick_dirichlet_s_transform() {
  CriterionResult res{"wick-dirichlet-s-transform", false, ""};
  cov::CovarianceSpec spec = plain_spec(0.4);
  const GridSpec grid{1.0, 9};
  const double eps = 0.45;
  pressure::ChaosField cf = pressure::chaos_field_from_covariance(grid, spec, eps, 0);
  ForcingSpec fsp = ForcingSpec::sine(0.8, 1, 1.0);
  const BoundaryData bc{BcKind::dirichlet, 0.3, 1.1};
  pressure::ChaosSolution wick = pressure::solve_wick_chaos(cf, fsp, bc, 12);

  double var_cap = 0.0;
  for (const auto& v : wick.values)
    var_cap = std::max(var_cap, std::max(v.truncation_loss, 0.0));

  rng::NormalStream rs(90909, 0);
  double worst_gap = 0.0, worst_tol = 0.0;
  bool ok = true;
  for (int t = 0; t < 20; ++t) {
    chaos::GaussianPoint pt;
    pt.coeffs.resize(cf.n_vars);
    for (double& c : pt.coeffs) c = rs.normal();
    pt.lambda = 0.2;
    std::vector<double> loaded = pt.loaded();
    double p2 = 0.0;
    for (double v : loaded) p2 += v * v;
    std::vector<double> profile(grid.n_points, 0.0);
    for (std::size_t j = 0; j < grid.n_points; ++j)
      for (std::size_t k = 0; k < cf.n_vars; ++k)
        profile[j] += cf.beta * cf.loadings[j][k] * loaded[k];
    std::vector<double> side = pressure::solve_s_side(grid, profile, fsp, bc);
    double tol = std::sqrt(var_cap) * std::exp(0.5 * p2) + 1e-9;
    for (std::size_t i = 0; i < grid.n_points; ++i) {
      double gap = std::fabs(chaos::s_transform(wick.values[i], pt) - side[i]);
      worst_gap = std::max(worst_gap, gap);
      worst_tol = std::max(worst_tol, tol);
      if (gap > tol) ok = false;
    }
  }
  res.passed = ok;
  res.detail = "worst gap " + num(worst_gap) + " vs truncation tolerance " + num(worst_tol) +
               " over 20 points at lambda 0.2";
  return res;
}

CriterionResult potential_operator() {
  CriterionResult res{"potential-operator", false, ""};
  cov::CovarianceSpec spec = plain_spec(0.5);
  const GridSpec grid{1.0, 201};
  potential::PotentialOperator op = potential::build_G(0.25, grid, spec);

  std::vector<double> mids = op.nodes();
  std::vector<double> ones(op.size(), 1.0);
  std::vector<double> g1 = op.apply(ones);
  double worst_const = 0.0;
  for (std::size_t i = 0; i < g1.size(); ++i)
    worst_const = std::max(
        worst_const, std::fabs(g1[i] - potential::riesz_indicator_exact(0.25, 1.0, mids[i], 1.0)));

  std::vector<double> phi(op.size());
  for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = std::sin(2.0 * kPi * mids[i]) + 0.3;
  potential::InvertReport ir = potential::invert_G(op, op.apply(phi));
  double scale = 0.0, worst_rt = 0.0;
  for (double v : phi) scale = std::max(scale, std::fabs(v));
  for (std::size_t i = 0; i < phi.size(); ++i)
    worst_rt = std::max(worst_rt, std::fabs(ir.solution[i] - phi[i]));
  worst_rt /= scale;

  cov::NondegenerateBuild built = cov::build_nondegenerate_h(1.0, 1.0);
  cov::CovarianceSpec hard = plain_spec(0.5);
  hard.h = built.h;
  potential::C0Report c0 = potential::nondegeneracy_check(hard, 0.5, GridSpec{1.0, 129});

  res.passed = worst_const <= 1e-6 && worst_rt <= 1e-6 && !ir.regularized && c0.c0 > 0.0 &&
               !c0.violated;
  res.detail = "G*1 err " + num(worst_const) + ", inversion rel err " + num(worst_rt) +
               ", c0 " + num(c0.c0) + " on the constructed kernel";
  return res;
}

CriterionResult projection_suite() {
  CriterionResult res{"projection", false, ""};
  const double beta = 0.4;

  // Transform consistency with matched discretization: the chaos solution's
  // s transform against the deterministic weighted solve, full-rank field.
  cov::CovarianceSpec spec = plain_spec(beta);
  const GridSpec tg{1.0, 5};
  const double eps = 0.5;
  pressure::ChaosField cf = pressure::chaos_field_from_covariance(tg, spec, eps, 5);
  ForcingSpec fsp = ForcingSpec::sine(0.7, 1, 1.0);
  const BoundaryData ivp{BcKind::ivp, 0.5, 1.5};
  pressure::ChaosSolution wick = pressure::solve_wick_chaos(cf, fsp, ivp, 10);
  cov::CovEvaluator ev(spec);
  Eigen::MatrixXd L(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int k = 0; k < 5; ++k) L(i, k) = cf.loadings[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  double s_gap = 0.0;
  for (double z : {0.3, 0.55}) {
    Eigen::VectorXd p(5);
    for (int j = 0; j < 5; ++j)
      p(j) = beta * ev.cov(0.0, std::fabs(z - tg.node(static_cast<std::size_t>(j))), eps, eps).value;
    Eigen::VectorXd h = L.colPivHouseholderQr().solve(p);
    if ((L * h - p).norm() > 1e-8) throw numerical_error("loadings solve failed");
    chaos::GaussianPoint pt;
    pt.coeffs.assign(h.data(), h.data() + 5);
    pt.lambda = 1.0;
    std::vector<double> profile(5);
    for (int j = 0; j < 5; ++j) profile[static_cast<std::size_t>(j)] = beta * p(j);
    std::vector<double> side = pressure::solve_s_side(tg, profile, fsp, ivp);
    for (std::size_t i = 0; i < 5; ++i)
      s_gap = std::max(s_gap,
                       std::fabs(chaos::s_transform(wick.values[i], pt) - side[i]));
  }

  // Quadrature consistency of the transported solution, plain and lifted.
  const BoundaryData dir{BcKind::dirichlet, 0.3, 1.1};
  GridSpec zg{1.0, 17};
  GridSpec tfine{1.0, 513};
  projection::ProjectedSolution plain =
      projection::solve_projected_bvp(beta, beta, spec, fsp, dir, zg, tfine);
  double quad_gap = 0.0;
  for (std::size_t zi : {1u, 8u, 14u}) {
    std::vector<double> oracle =
        oracle_transport(zg.cell_mid(zi), tfine, beta, beta, spec, fsp, dir, 16);
    for (std::size_t i = 0; i < tfine.n_points; ++i)
      quad_gap = std::max(quad_gap, std::fabs(plain.u_tilde[zi][i] - oracle[i]));
  }
  cov::CovarianceSpec lifted = plain_spec(beta);
  lifted.h = mild_h();
  GridSpec tlift{1.0, 1025};
  projection::ProjectedSolution bent =
      projection::solve_projected_bvp(beta, beta, lifted, fsp, dir, zg, tlift);
  double lift_gap = 0.0;
  for (std::size_t zi : {2u, 8u, 13u}) {
    std::vector<double> oracle =
        oracle_transport(zg.cell_mid(zi), tlift, beta, beta, lifted, fsp, dir, 32);
    for (std::size_t i = 0; i < tlift.n_points; ++i)
      lift_gap = std::max(lift_gap, std::fabs(bent.u_tilde[zi][i] - oracle[i]));
  }

  // Cross moments at (0.4, 0.6): projected kernel by quadrature, then the
  // coupled Monte Carlo difference against its exact smoothed-node value.
  const double bp = 0.6;
  GridSpec cg{1.0, 65};
  std::vector<double> phi(cg.n_cells()), psi(cg.n_cells());
  for (std::size_t i = 0; i < cg.n_cells(); ++i) {
    double x = cg.cell_mid(i);
    phi[i] = std::sin(2.0 * kPi * x) * std::exp(x - 1.0) + 0.2;
    psi[i] = std::cos(kPi * x);
  }
  std::vector<double> phip = projection::project_kernel(phi, beta, bp, cg, lifted);
  double lhs = cross_moment(psi, phi, beta * bp, cg, lifted, 10);
  double rhs = cross_moment(psi, phip, bp * bp, cg, lifted, 10);
  double cross_gap = std::fabs(lhs - rhs);

  cov::CovEvaluator lev(lifted);
  auto mc_prediction = [&](double e) {
    double pred = 0.0;
    for (std::size_t i = 0; i < cg.n_cells(); ++i)
      for (std::size_t j = 0; j < cg.n_cells(); ++j) {
        double cij = lev.cov(cg.node(i), cg.node(j), e, e).value;
        pred += psi[j] * (phi[i] * std::exp(beta * bp * cij) -
                          phip[i] * std::exp(bp * bp * cij)) *
                cg.delta() * cg.delta();
      }
    return pred;
  };
  double pred = mc_prediction(0.04);
  double pred_half = mc_prediction(0.02);
  field::FieldSampler sampler(cg, {0.04}, lifted);
  stats::Moments diff;
  for (std::size_t r = 0; r < 20000; ++r) {
    field::FieldSample s = sampler.draw(9090, r);
    gmc::GmcMeasure mu_b = gmc::gmc_from_field(s, 0, beta);
    gmc::GmcMeasure mu_p = gmc::gmc_from_field(s, 0, bp);
    double zv = 0.0, zpv = 0.0, v = 0.0;
    for (std::size_t i = 0; i < cg.n_cells(); ++i) {
      zv += phi[i] * mu_b.cell_mass[i];
      zpv += phip[i] * mu_p.cell_mass[i];
      v += psi[i] * mu_p.cell_mass[i];
    }
    moments_push(diff, zv * v - zpv * v);
  }
  double se = diff.std_error();
  double mc_units = std::fabs(diff.mean() - pred) / se;
  bool pred_shrinks = std::fabs(pred_half) < std::fabs(pred);

  // Kernel recovery round trip at beta'^2.
  potential::PotentialOperator gp = potential::build_G(bp * bp, cg, lifted);
  potential::InvertReport ir = potential::invert_G(gp, gp.apply(phi));
  double scale = 0.0, recover_gap = 0.0;
  for (double v : phi) scale = std::max(scale, std::fabs(v));
  for (std::size_t i = 0; i < phi.size(); ++i)
    recover_gap = std::max(recover_gap, std::fabs(ir.solution[i] - phi[i]));
  recover_gap /= scale;

  res.passed = s_gap <= 1e-5 && quad_gap <= 1e-5 && lift_gap <= 1e-5 &&
               cross_gap <= 1e-5 && mc_units <= 4.0 && pred_shrinks && recover_gap <= 1e-6;
  res.detail = "s-transform gap " + num(s_gap) + ", quadrature gap " + num(quad_gap) +
               " (lifted " + num(lift_gap) + "), cross moment gap " + num(cross_gap) +
               ", MC " + num(mc_units) + " SE vs smoothed value " + num(pred) +
               ", recovery rel err " + num(recover_gap);
  return res;
}

CriterionResult holder_exponents() {
  CriterionResult res{"holder-exponents", false, ""};
  cov::CovarianceSpec spec = plain_spec(0.5);
  const GridSpec grid{1.0, 201};
  field::FieldSampler sampler(grid, {0.01}, spec);
  std::vector<gmc::GmcMeasure> low, high;
  for (std::size_t r = 0; r < 100; ++r) {
    field::FieldSample s = sampler.draw(121212, r);
    low.push_back(gmc::gmc_from_field(s, 0, 0.3));
    high.push_back(gmc::gmc_from_field(s, 0, 0.7));
  }
  gmc::HolderFit f_low = gmc::holder_modulus_fit(low);
  gmc::HolderFit f_high = gmc::holder_modulus_fit(high);
  res.passed = f_low.eta > f_high.eta && f_high.eta > 0.0;
  res.detail = "eta(0.3) = " + num(f_low.eta) + ", eta(0.7) = " + num(f_high.eta) +
               " (r2 " + num(f_low.r_squared) + ", " + num(f_high.r_squared) + ")";
  return res;
}

CriterionResult reproducibility() {
  CriterionResult res{"reproducibility", false, ""};
  fs::path root = fs::temp_directory_path() / "gmclab-acceptance";
  std::error_code ec;
  fs::remove_all(root, ec);

  harness::ExperimentConfig cfg;
  cfg.kind = harness::StudyKind::gmc_stats;
  cfg.spec = plain_spec(0.5);
  cfg.grid = GridSpec{1.0, 101};
  cfg.eps_schedule = {0.04, 0.02};
  cfg.replicates = 400;
  cfg.seed = 99;
  cfg.forcing = ForcingSpec::zero(1.0);

  auto run_into = [&](const std::string& name, std::size_t workers) {
    harness::ExperimentConfig c = cfg;
    c.workers = workers;
    c.out_dir = (root / name).string();
    return harness::run(c, c.serialize());
  };
  harness::RunManifest a = run_into("a", 2);
  harness::RunManifest b = run_into("b", 2);
  harness::RunManifest c = run_into("c", 1);

  bool same = a.artifacts == b.artifacts && a.artifacts == c.artifacts && !a.artifacts.empty();
  for (const std::string& name : a.artifacts) {
    std::string bytes = slurp(root / "a" / name);
    same = same && !bytes.empty() && bytes == slurp(root / "b" / name) &&
           bytes == slurp(root / "c" / name);
  }
  fs::remove_all(root, ec);
  res.passed = same;
  res.detail = "artifacts (" + std::to_string(a.artifacts.size()) +
               ") bit-identical across rerun and worker counts 2 vs 1";
  return res;
}

void emit(std::ostream& os, std::vector<CriterionResult>& all, CriterionResult r) {
  os << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
  os.flush();
  all.push_back(std::move(r));
}

}  // namespace

std::vector<CriterionResult> run_suite(std::ostream& lines) {
  std::vector<CriterionResult> all;
  auto guarded = [&](const std::string& name, auto&& fn) {
    try {
      emit(lines, all, fn());
    } catch (const std::exception& e) {
      emit(lines, all, CriterionResult{name, false, std::string("exception: ") + e.what()});
    }
  };

  try {
    CriterionResult second;
    CriterionResult first = gmc_mean_and_second_moment(second);
    emit(lines, all, first);
    emit(lines, all, second);
  } catch (const std::exception& e) {
    emit(lines, all, CriterionResult{"gmc-mean", false, std::string("exception: ") + e.what()});
    emit(lines, all, CriterionResult{"gmc-second-moment", false, "skipped"});
  }
  guarded("gmc-negative-moments", negative_moments);
  guarded("pathwise-dirichlet-exactness", dirichlet_exactness);
  guarded("pathwise-residual-decay", residual_decay);
  guarded("eps-convergence", eps_convergence);
  guarded("wick-algebra", wick_algebra);
  guarded("wick-pathwise-match", wick_pathwise_match);
  guarded("wick-dirichlet-s-transform", wick_dirichlet_s_transform);
  guarded("potential-operator", potential_operator);
  guarded("projection", projection_suite);
  guarded("holder-exponents", holder_exponents);
  guarded("reproducibility", reproducibility);
  return all;
}

}  // namespace gmclab::acceptance
