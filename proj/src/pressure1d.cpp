#include "gmclab/pressure1d.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Dense>
#include <json.hpp>

#include "gmclab/stats.hpp"
#include "gmclab/textio.hpp"

namespace gmclab::pressure {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

const char* bc_name(BcKind k) {
  switch (k) {
    case BcKind::ivp: return "ivp";
    case BcKind::dirichlet: return "dirichlet";
    case BcKind::neumann: return "neumann";
    case BcKind::periodic: return "periodic";
  }
  return "unknown";
}

// Boundary-family preconditions shared by every solver flavor.
void check_bc(const ForcingSpec& forcing, const BoundaryData& bc) {
  std::vector<std::string> bad;
  if (bc.kind == BcKind::periodic && std::fabs(forcing.integral()) > 1e-12)
    bad.push_back("pressure: periodic data needs mean-zero f; int f = " +
                  g17(forcing.integral()));
  if (bc.kind == BcKind::neumann &&
      std::fabs(bc.u2 - bc.u1 - forcing.F(forcing.T)) > 1e-12)
    bad.push_back("pressure: neumann data needs U2 - U1 = -int f; gap = " +
                  g17(bc.u2 - bc.u1 - forcing.F(forcing.T)));
  if (!std::isfinite(bc.u1) || !std::isfinite(bc.u2))
    bad.push_back("pressure: boundary values must be finite");
  if (!bad.empty()) throw validation_error(bad);
}

void check_domains_match(double forcing_T, double grid_T) {
  if (std::fabs(forcing_T - grid_T) > 1e-12 * std::max(1.0, grid_T))
    throw validation_error("pressure: forcing domain [0," + g17(forcing_T) +
                           "] does not match the grid domain [0," + g17(grid_T) + "]");
}

double scalar_kappa(const BoundaryData& bc, double total, double int_f_dmu) {
  switch (bc.kind) {
    case BcKind::ivp: return bc.u2;
    case BcKind::neumann: return bc.u1;
    case BcKind::dirichlet: return (bc.u2 - bc.u1 - int_f_dmu) / total;
    case BcKind::periodic: return -int_f_dmu / total;
  }
  throw validation_error("pressure: unknown boundary kind");
}

double start_value(const BoundaryData& bc) {
  // Neumann and periodic solutions are representatives of a family shifted
  // by a constant; pin them at zero.
  return (bc.kind == BcKind::ivp || bc.kind == BcKind::dirichlet) ? bc.u1 : 0.0;
}

}  // namespace

ForcingSpec ForcingSpec::zero(double T) {
  ForcingSpec s;
  s.family = Family::zero;
  s.T = T;
  s.validate();
  return s;
}

ForcingSpec ForcingSpec::constant(double value, double T) {
  ForcingSpec s;
  s.family = Family::constant;
  s.amplitude = value;
  s.T = T;
  s.validate();
  return s;
}

ForcingSpec ForcingSpec::sine(double amplitude, int cycles, double T, double phase) {
  ForcingSpec s;
  s.family = Family::sine;
  s.amplitude = amplitude;
  s.cycles = cycles;
  s.T = T;
  s.phase = phase;
  s.validate();
  return s;
}

ForcingSpec ForcingSpec::piecewise(std::vector<double> breaks,
                                   std::vector<double> pieces) {
  ForcingSpec s;
  s.family = Family::piecewise;
  s.breaks = std::move(breaks);
  s.pieces = std::move(pieces);
  s.T = s.breaks.empty() ? 0.0 : s.breaks.back();
  s.validate();
  return s;
}

void ForcingSpec::validate() const {
  std::vector<std::string> bad;
  if (!(T > 0.0) || !std::isfinite(T)) bad.push_back("forcing: T must be positive");
  if (!std::isfinite(amplitude)) bad.push_back("forcing: amplitude must be finite");
  if (family == Family::sine) {
    if (cycles < 1) bad.push_back("forcing: sine needs at least one whole cycle");
    if (!std::isfinite(phase)) bad.push_back("forcing: phase must be finite");
  }
  if (family == Family::piecewise) {
    if (breaks.size() < 2 || pieces.size() + 1 != breaks.size())
      bad.push_back("forcing: piecewise needs k+1 breaks for k pieces");
    else {
      if (breaks.front() != 0.0) bad.push_back("forcing: first break must be 0");
      for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
        if (!(breaks[i] < breaks[i + 1])) {
          bad.push_back("forcing: breaks must increase strictly");
          break;
        }
    }
    for (double v : pieces)
      if (!std::isfinite(v)) {
        bad.push_back("forcing: piece values must be finite");
        break;
      }
  }
  if (!bad.empty()) throw validation_error(bad);
}

double ForcingSpec::f(double t) const {
  // Grid nodes can land an ulp outside [0, T]; the forcing is only ever
  // meant on the closed domain.
  t = std::min(std::max(t, 0.0), T);
  switch (family) {
    case Family::zero: return 0.0;
    case Family::constant: return amplitude;
    case Family::sine:
      return amplitude * std::sin(kTwoPi * cycles * t / T + phase);
    case Family::piecewise: {
      auto it = std::upper_bound(breaks.begin(), breaks.end(), t);
      std::size_t cell = it == breaks.begin()
                             ? 0
                             : static_cast<std::size_t>(it - breaks.begin()) - 1;
      if (cell >= pieces.size()) cell = pieces.size() - 1;
      return pieces[cell];
    }
  }
  return 0.0;
}

double ForcingSpec::F(double t) const {
  t = std::min(std::max(t, 0.0), T);
  switch (family) {
    case Family::zero: return 0.0;
    case Family::constant: return -amplitude * t;
    case Family::sine: {
      double w = kTwoPi * cycles / T;
      return (amplitude / w) * (std::cos(w * t + phase) - std::cos(phase));
    }
    case Family::piecewise: {
      double acc = 0.0;
      for (std::size_t i = 0; i < pieces.size(); ++i) {
        double hi = std::min(t, breaks[i + 1]);
        if (hi <= breaks[i]) break;
        acc -= pieces[i] * (hi - breaks[i]);
      }
      return acc;
    }
  }
  return 0.0;
}

double ForcingSpec::integral() const { return -F(T); }

double ForcingSpec::total_abs() const {
  switch (family) {
    case Family::zero: return 0.0;
    case Family::constant: return std::fabs(amplitude) * T;
    case Family::sine:
      // Whole periods: each contributes 4 |a| / omega.
      return 2.0 * std::fabs(amplitude) * T / 3.14159265358979323846;
    case Family::piecewise: {
      double acc = 0.0;
      for (std::size_t i = 0; i < pieces.size(); ++i)
        acc += std::fabs(pieces[i]) * (breaks[i + 1] - breaks[i]);
      return acc;
    }
  }
  return 0.0;
}

double ForcingSpec::sup_abs_F() const {
  switch (family) {
    case Family::zero: return 0.0;
    case Family::constant: return std::fabs(amplitude) * T;
    case Family::sine: {
      double w = kTwoPi * cycles / T;
      // cos(wt + phase) sweeps [-1, 1] over a whole cycle.
      return std::fabs(amplitude / w) * (1.0 + std::fabs(std::cos(phase)));
    }
    case Family::piecewise: {
      // F is piecewise linear, so extrema sit on the breakpoints.
      double m = 0.0;
      for (const double b : breaks) m = std::max(m, std::fabs(F(b)));
      return m;
    }
  }
  return 0.0;
}

double SolutionPath::total_variation() const {
  double tv = 0.0;
  for (std::size_t i = 0; i + 1 < values.size(); ++i)
    tv += std::fabs(values[i + 1] - values[i]);
  return tv;
}

SolutionPath solve_pathwise(const gmc::GmcMeasure& mu, const ForcingSpec& forcing,
                            const BoundaryData& bc) {
  forcing.validate();
  mu.grid.validate();
  check_domains_match(forcing.T, mu.grid.T);
  check_bc(forcing, bc);

  double total = mu.total();
  if (!std::isfinite(total) || !(total > 0.0))
    throw numerical_error("pressure: measure has degenerate total mass " + g17(total));

  double int_f_dmu = 0.0;
  for (std::size_t j = 0; j < mu.cell_mass.size(); ++j)
    int_f_dmu += forcing.F(mu.grid.cell_mid(j)) * mu.cell_mass[j];

  SolutionPath u;
  u.grid = mu.grid;
  u.beta = mu.beta;
  u.eps = mu.eps;
  u.bc = bc;
  u.kappa = scalar_kappa(bc, total, int_f_dmu);
  u.values.resize(static_cast<std::size_t>(mu.grid.n_points));
  u.values[0] = start_value(bc);
  for (std::size_t j = 0; j < mu.cell_mass.size(); ++j)
    u.values[j + 1] =
        u.values[j] + (u.kappa + forcing.F(mu.grid.cell_mid(j))) * mu.cell_mass[j];
  return u;
}

ResidualReport verify_pathwise_ode(const SolutionPath& u,
                                   const field::FieldSample& sample,
                                   std::size_t level, const ForcingSpec& forcing) {
  std::vector<std::string> bad;
  if (level >= sample.eps_levels.size())
    bad.push_back("pressure: field level out of range");
  else if (u.eps != sample.eps_levels[level])
    bad.push_back("pressure: solution eps " + g17(u.eps) +
                  " is not the field level eps " + g17(sample.eps_levels[level]));
  if (sample.grid.n_points != u.grid.n_points || sample.grid.T != u.grid.T)
    bad.push_back("pressure: solution and field use different grids");
  if (u.grid.n_points < 5)
    bad.push_back("pressure: residual needs at least 5 grid points");
  if (!bad.empty()) throw validation_error(bad);

  const std::vector<double>& x = sample.values[level];
  const double s2 = sample.sigma2[level];
  const double beta = u.beta;
  const double delta = u.grid.delta();
  const int n = static_cast<int>(u.grid.n_points);

  // v_i = exp(-beta X_i - beta^2 s2 / 2) * centered D[U]; the prefactor
  // e^{beta^2 s2} undoes the Wick normalizations so the residual tends to 0
  // with the grid at fixed eps.
  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  for (int i = 1; i + 1 < n; ++i) {
    double du = (u.values[static_cast<std::size_t>(i + 1)] -
                 u.values[static_cast<std::size_t>(i - 1)]) /
                (2.0 * delta);
    v[static_cast<std::size_t>(i)] =
        std::exp(-beta * x[static_cast<std::size_t>(i)] - 0.5 * beta * beta * s2) * du;
  }

  ResidualReport rep;
  double sq = 0.0;
  for (int i = 2; i + 2 < n; ++i) {
    double dv = (v[static_cast<std::size_t>(i + 1)] - v[static_cast<std::size_t>(i - 1)]) /
                (2.0 * delta);
    double r = -std::exp(beta * beta * s2) * dv - forcing.f(u.grid.node(i));
    rep.max_abs = std::max(rep.max_abs, std::fabs(r));
    sq += r * r;
    ++rep.n_interior;
  }
  rep.rms = rep.n_interior ? std::sqrt(sq / static_cast<double>(rep.n_interior)) : 0.0;
  return rep;
}

double residual_decay_order(const std::vector<double>& deltas,
                            const std::vector<double>& max_residuals) {
  if (deltas.size() != max_residuals.size() || deltas.size() < 2)
    throw validation_error("pressure: decay order needs matched samples of size >= 2");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0) || !(max_residuals[i] > 0.0))
      throw validation_error("pressure: decay order needs positive deltas and residuals");
    lx.push_back(std::log(deltas[i]));
    ly.push_back(std::log(max_residuals[i]));
  }
  return stats::fit_line(lx, ly).slope;
}

std::vector<double> solve_s_side(const GridSpec& grid,
                                 const std::vector<double>& c_profile,
                                 const ForcingSpec& forcing, const BoundaryData& bc,
                                 double* kappa_out) {
  grid.validate();
  forcing.validate();
  check_domains_match(forcing.T, grid.T);
  check_bc(forcing, bc);
  if (c_profile.size() != static_cast<std::size_t>(grid.n_points))
    throw validation_error("pressure: covariance profile must be tabulated per node");

  const double delta = grid.delta();
  std::vector<double> w(static_cast<std::size_t>(grid.n_cells()));
  double total = 0.0, int_f = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    w[j] = std::exp(c_profile[j]) * delta;  // left-node weight, like cell masses
    total += w[j];
    int_f += forcing.F(grid.cell_mid(j)) * w[j];
  }

  double kappa = scalar_kappa(bc, total, int_f);
  if (kappa_out) *kappa_out = kappa;
  std::vector<double> u(static_cast<std::size_t>(grid.n_points));
  u[0] = start_value(bc);
  for (std::size_t j = 0; j < w.size(); ++j)
    u[j + 1] = u[j] + (kappa + forcing.F(grid.cell_mid(j))) * w[j];
  return u;
}

ChaosField chaos_field_from_covariance(const GridSpec& grid,
                                       const cov::CovarianceSpec& spec, double eps,
                                       std::size_t n_vars) {
  grid.validate();
  spec.validate();
  if (!(eps > 0.0)) throw validation_error("pressure: eps must be positive");
  const int n = static_cast<int>(grid.n_points);
  if (n_vars > static_cast<std::size_t>(n))
    throw validation_error("pressure: more base Gaussians than grid points");

  cov::CovEvaluator ev(spec, 1e-11);
  const double delta = grid.delta();
  std::vector<double> table(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    double d = std::min(k * delta, spec.T);
    table[static_cast<std::size_t>(k)] = ev.cov(0.0, d, eps, eps).value;
  }
  Eigen::MatrixXd c(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c(i, j) = table[static_cast<std::size_t>(std::abs(i - j))];

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  if (eig.info() != Eigen::Success)
    throw numerical_error("pressure: covariance eigendecomposition failed");
  Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);  // ascending
  double trace = lam.sum();
  if (!(trace > 0.0)) throw numerical_error("pressure: covariance trace is not positive");

  auto discarded = [&](std::size_t k) {
    double kept = 0.0;
    for (std::size_t j = 0; j < k; ++j) kept += lam(n - 1 - static_cast<int>(j));
    return 1.0 - kept / trace;
  };

  std::size_t picked = n_vars;
  if (picked == 0) {
    std::size_t limit = std::min<std::size_t>(6, static_cast<std::size_t>(n));
    for (std::size_t k = 1; k <= limit; ++k) {
      if (discarded(k) <= 0.05) {
        picked = k;
        break;
      }
    }
    if (picked == 0)
      throw numerical_error(
          "pressure: even " + std::to_string(std::min<std::size_t>(6, n)) +
          " base Gaussians leave " + g17(discarded(std::min<std::size_t>(6, n))) +
          " of the variance uncovered");
  }

  ChaosField out;
  out.grid = grid;
  out.beta = spec.beta;
  out.eps = eps;
  out.n_vars = picked;
  out.discarded_variance = discarded(picked);
  out.loadings.assign(static_cast<std::size_t>(n), std::vector<double>(picked, 0.0));
  out.sigma2.assign(static_cast<std::size_t>(n), 0.0);
  for (std::size_t k = 0; k < picked; ++k) {
    int col = n - 1 - static_cast<int>(k);  // descending eigenvalues
    Eigen::VectorXd v = eig.eigenvectors().col(col);
    int arg = 0;
    for (int i = 1; i < n; ++i)
      if (std::fabs(v(i)) > std::fabs(v(arg))) arg = i;
    if (v(arg) < 0.0) v = -v;  // deterministic orientation
    double s = std::sqrt(lam(col));
    for (int i = 0; i < n; ++i) {
      double l = v(i) * s;
      out.loadings[static_cast<std::size_t>(i)][k] = l;
      out.sigma2[static_cast<std::size_t>(i)] += l * l;
    }
  }
  return out;
}

ChaosSolution solve_wick_chaos(const ChaosField& field, const ForcingSpec& forcing,
                               const BoundaryData& bc, std::size_t cap) {
  field.grid.validate();
  forcing.validate();
  check_domains_match(forcing.T, field.grid.T);
  check_bc(forcing, bc);
  if (field.n_vars == 0) throw validation_error("pressure: chaos field has no variables");
  if (field.loadings.size() != static_cast<std::size_t>(field.grid.n_points))
    throw validation_error("pressure: loadings must be tabulated per node");
  if (cap < 1) throw validation_error("pressure: chaos cap must be at least 1");

  using chaos::ChaosExpansion;
  const double delta = field.grid.delta();
  const std::size_t cells = static_cast<std::size_t>(field.grid.n_cells());

  std::vector<ChaosExpansion> mass(cells);
  ChaosExpansion total = ChaosExpansion::constant(field.n_vars, 0.0, cap);
  ChaosExpansion int_f = total;
  std::vector<double> f_mid(cells);
  for (std::size_t j = 0; j < cells; ++j) {
    if (field.loadings[j].size() != field.n_vars)
      throw validation_error("pressure: loading row width does not match n_vars");
    mass[j] = chaos::scale(
        chaos::wick_exp(chaos::GaussianPoint{field.loadings[j], field.beta}, cap),
        delta);
    f_mid[j] = forcing.F(field.grid.cell_mid(j));
    total = chaos::add(total, mass[j]);
    int_f = chaos::add(int_f, chaos::scale(mass[j], f_mid[j]));
  }

  ChaosSolution out;
  out.grid = field.grid;
  out.beta = field.beta;
  out.eps = field.eps;
  out.bc = bc;
  switch (bc.kind) {
    case BcKind::ivp:
      out.kappa = ChaosExpansion::constant(field.n_vars, bc.u2, cap);
      break;
    case BcKind::neumann:
      out.kappa = ChaosExpansion::constant(field.n_vars, bc.u1, cap);
      break;
    case BcKind::dirichlet: {
      ChaosExpansion num = chaos::add(
          ChaosExpansion::constant(field.n_vars, bc.u2 - bc.u1, cap),
          chaos::scale(int_f, -1.0));
      out.kappa = chaos::wick_mul(num, chaos::wick_inverse(total, cap).inverse, cap);
      break;
    }
    case BcKind::periodic:
      out.kappa = chaos::wick_mul(chaos::scale(int_f, -1.0),
                                  chaos::wick_inverse(total, cap).inverse, cap);
      break;
  }

  out.values.reserve(cells + 1);
  out.values.push_back(
      ChaosExpansion::constant(field.n_vars, start_value(bc), cap));
  for (std::size_t j = 0; j < cells; ++j) {
    ChaosExpansion gain = chaos::wick_mul(
        chaos::add(out.kappa, ChaosExpansion::constant(field.n_vars, f_mid[j], cap)),
        mass[j], cap);
    out.values.push_back(chaos::add(out.values.back(), gain));
  }
  return out;
}

ConvergenceReport convergence_study(const cov::CovarianceSpec& spec,
                                    const GridSpec& grid,
                                    std::vector<double> eps_schedule,
                                    const ForcingSpec& forcing,
                                    const BoundaryData& bc, std::size_t replicates,
                                    std::uint64_t seed) {
  std::vector<std::string> bad;
  if (eps_schedule.size() < 2)
    bad.push_back("pressure: convergence needs at least two smoothing levels");
  for (std::size_t l = 0; l + 1 < eps_schedule.size(); ++l)
    if (!(eps_schedule[l] > eps_schedule[l + 1])) {
      bad.push_back("pressure: eps schedule must decrease strictly");
      break;
    }
  if (replicates < 10) bad.push_back("pressure: convergence needs >= 10 replicates");
  if (!bad.empty()) throw validation_error(bad);

  field::FieldSampler sampler(grid, eps_schedule, spec);
  const std::size_t pairs = eps_schedule.size() - 1;
  std::vector<std::vector<double>> sup_dist(pairs);
  for (auto& v : sup_dist) v.reserve(replicates);

  for (std::size_t r = 0; r < replicates; ++r) {
    field::FieldSample s = sampler.draw(seed, r);
    std::vector<SolutionPath> sols;
    sols.reserve(eps_schedule.size());
    for (std::size_t l = 0; l < eps_schedule.size(); ++l)
      sols.push_back(solve_pathwise(gmc::gmc_from_field(s, l, spec.beta), forcing, bc));
    for (std::size_t l = 0; l < pairs; ++l) {
      double d = 0.0;
      for (std::size_t i = 0; i < sols[l].values.size(); ++i)
        d = std::max(d, std::fabs(sols[l].values[i] - sols[l + 1].values[i]));
      sup_dist[l].push_back(d);
    }
  }

  ConvergenceReport rep;
  rep.eps = std::move(eps_schedule);
  rep.replicates = replicates;
  rep.seed = seed;
  for (std::size_t l = 0; l < pairs; ++l)
    rep.ky_fan.push_back(stats::ky_fan(sup_dist[l]));
  rep.monotone = true;
  for (std::size_t l = 0; l + 1 < pairs; ++l)
    if (!(rep.ky_fan[l] > rep.ky_fan[l + 1])) rep.monotone = false;
  return rep;
}

std::string ConvergenceReport::to_json() const {
  nlohmann::json j;
  j["eps"] = eps;
  j["ky_fan"] = ky_fan;
  j["monotone"] = monotone;
  j["replicates"] = replicates;
  j["seed"] = seed;
  return j.dump();
}

void write_solution_csv(std::ostream& os, const SolutionPath& u) {
  os << "t,value\n";
  for (std::size_t i = 0; i < u.values.size(); ++i)
    os << g17(u.grid.node(i)) << "," << g17(u.values[i]) << "\n";
}

void write_chaos_solution_json(std::ostream& os, const ChaosSolution& u) {
  nlohmann::json j;
  j["grid"] = {{"T", u.grid.T}, {"n_points", u.grid.n_points}};
  j["beta"] = u.beta;
  j["eps"] = u.eps;
  j["bc"] = {{"kind", bc_name(u.bc.kind)}, {"u1", u.bc.u1}, {"u2", u.bc.u2}};
  j["kappa"] = nlohmann::json::parse(u.kappa.to_json());
  nlohmann::json vals = nlohmann::json::array();
  for (const auto& v : u.values) vals.push_back(nlohmann::json::parse(v.to_json()));
  j["values"] = std::move(vals);
  os << j.dump();
}

}  // namespace gmclab::pressure
