#include "gmclab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "gmclab/errors.hpp"
#include "gmclab/hashing.hpp"
#include "gmclab/quadrature.hpp"
#include "gmclab/rng.hpp"

namespace gmclab::potential {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw validation_error("potential: alpha must lie in (0,1); the kernel "
                            "|z-y|^{-alpha} is not integrable at alpha >= 1");
}

// Unit-square integrals A1 = iint v^2 (u+v)^{-1-2s} du dv and
// B1 = iint u v (u+v)^{-1-2s} du dv, used for the exact piecewise-linear
// Gagliardo contribution of adjacent cells.  The inner u-integral is closed
// form; expm1/log1p keep it stable near s = 0 and s = 1/2.
struct AdjacentWeights {
  double a1 = 0.0;
  double b1 = 0.0;
};

double stable_power_diff(double v, double p) {
  // ((1+v)^p - v^p) / p, continuous through p = 0.
  double l = std::log1p(1.0 / v);
  if (std::fabs(p) < 1e-12) return l;
  return std::pow(v, p) * std::expm1(p * l) / p;
}

AdjacentWeights adjacent_weights(double s) {
  static std::map<double, AdjacentWeights> cache;
  static std::mutex mu;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(s);
    if (it != cache.end()) return it->second;
  }
  // K(v) = (v^{-2s} - (1+v)^{-2s}) / (2s) = v^{-2s} (1 - (1+1/v)^{-2s}) / (2s)
  auto K = [s](double v) {
    double l = std::log1p(1.0 / v);
    if (std::fabs(s) < 1e-12) return std::pow(v, -2.0 * s) * l;
    return std::pow(v, -2.0 * s) * -std::expm1(-2.0 * s * l) / (2.0 * s);
  };
  AdjacentWeights w;
  w.a1 = quad::integrate_adaptive([&](double v) { return v * v * K(v); }, 0.0, 1.0,
                                  1e-12);
  w.b1 = quad::integrate_adaptive(
      [&](double v) {
        double s1 = stable_power_diff(v, 1.0 - 2.0 * s);
        return v * (s1 - v * K(v));
      },
      0.0, 1.0, 1e-12);
  std::lock_guard<std::mutex> lock(mu);
  cache[s] = w;
  return w;
}

// Trapezoid inner product of uniform samples.
double trap(const std::vector<double>& f, const std::vector<double>& g,
            double spacing) {
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    double w = (i == 0 || i + 1 == f.size()) ? 0.5 : 1.0;
    acc += w * f[i] * g[i];
  }
  return acc * spacing;
}

struct DualDictionary {
  std::vector<std::vector<double>> modes;
  std::vector<double> norms;  // positive-order norms |psi_k|_{|s|}
};

const DualDictionary& dual_dictionary(std::size_t n, double spacing, double s_pos) {
  static std::map<std::tuple<std::size_t, double, double>, DualDictionary> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(n, spacing, s_pos);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  DualDictionary d;
  const double length = spacing * static_cast<double>(n - 1);
  for (int k = 0; k < 64; ++k) {
    std::vector<double> psi(n);
    for (std::size_t i = 0; i < n; ++i)
      psi[i] = std::cos(k * kPi * (static_cast<double>(i) * spacing) / length);
    d.norms.push_back(sobolev_norm(psi, spacing, s_pos));
    d.modes.push_back(std::move(psi));
  }
  return cache.emplace(key, std::move(d)).first->second;
}

double l2_sq_linear(const std::vector<double>& f, double spacing) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < f.size(); ++i)
    acc += spacing * (f[i] * f[i] + f[i] * f[i + 1] + f[i + 1] * f[i + 1]) / 3.0;
  return acc;
}

}  // namespace

std::vector<double> PotentialOperator::nodes() const {
  std::vector<double> z(grid.n_cells());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = grid.cell_mid(i);
  return z;
}

std::vector<double> PotentialOperator::apply(const std::vector<double>& phi) const {
  if (phi.size() != size())
    throw validation_error("potential: apply expects one value per collocation "
                            "midpoint");
  Eigen::Map<const Eigen::VectorXd> v(phi.data(),
                                      static_cast<Eigen::Index>(phi.size()));
  Eigen::VectorXd out = matrix * v;
  return {out.data(), out.data() + out.size()};
}

PotentialOperator build_G(double alpha, const GridSpec& grid,
                          const cov::CovarianceSpec& spec) {
  check_alpha(alpha);
  grid.validate();
  const std::size_t m = grid.n_cells();
  if (m < 2) throw validation_error("potential: need at least two cells");

  PotentialOperator op;
  op.alpha = alpha;
  op.grid = grid;
  op.matrix.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    const double zi = grid.cell_mid(i);
    for (std::size_t j = 0; j < m; ++j) {
      double base = quad::power_cell_integral(zi, grid.node(j), grid.node(j + 1),
                                              alpha);
      double lift =
          spec.h.is_zero() ? 1.0 : std::exp(alpha * spec.h(zi - grid.cell_mid(j)));
      op.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          base * lift;
    }
  }
  op.matrix = ((op.matrix + op.matrix.transpose()) / 2.0).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.matrix,
                                                    Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  op.min_eigenvalue = lo;
  op.condition_estimate =
      lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  return op;
}

double riesz_indicator_exact(double alpha, double t, double z, double T) {
  check_alpha(alpha);
  if (t < 0.0 || t > T || z < 0.0 || z > T)
    throw validation_error("potential: need 0 <= t <= T and z in [0, T]");
  const double p = 1.0 - alpha;
  if (z < t) return (std::pow(z, p) + std::pow(t - z, p)) / p;
  return (std::pow(z, p) - std::pow(z - t, p)) / p;
}

InvertReport invert_G(const PotentialOperator& op, const std::vector<double>& rhs) {
  if (rhs.size() != op.size())
    throw validation_error("potential: rhs size does not match the operator");
  Eigen::Map<const Eigen::VectorXd> b(rhs.data(),
                                      static_cast<Eigen::Index>(rhs.size()));
  InvertReport rep;
  rep.condition_estimate = op.condition_estimate;

  Eigen::VectorXd x;
  if (op.condition_estimate > 1e12 || op.min_eigenvalue <= 0.0) {
    // Floor the spectrum at a relative eigenvalue threshold; flagged, never
    // silent.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.matrix);
    Eigen::VectorXd ev = es.eigenvalues();
    const double floor = ev.maxCoeff() * 1e-12;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      ev(i) = std::max(ev(i), floor);
    x = es.eigenvectors() *
        (es.eigenvectors().transpose() * b).cwiseQuotient(ev).matrix();
    rep.regularized = true;
  } else {
    x = Eigen::LDLT<Eigen::MatrixXd>(op.matrix).solve(b);
  }
  rep.residual_norm = (op.matrix * x - b).norm();
  rep.solution.assign(x.data(), x.data() + x.size());
  return rep;
}

double sobolev_norm(const std::vector<double>& f, double spacing, double s) {
  if (f.size() < 2)
    throw validation_error("potential: sobolev_norm needs at least two samples");
  if (!(spacing > 0.0))
    throw validation_error("potential: sample spacing must be positive");
  if (!(std::fabs(s) < 1.0))
    throw validation_error("potential: sobolev order must satisfy |s| < 1");

  if (s < 0.0) {
    const DualDictionary& dict = dual_dictionary(f.size(), spacing, -s);
    double best = 0.0;
    for (std::size_t k = 0; k < dict.modes.size(); ++k) {
      double pairing = std::fabs(trap(f, dict.modes[k], spacing));
      if (dict.norms[k] > 0.0) best = std::max(best, pairing / dict.norms[k]);
    }
    return best;
  }

  double l2 = l2_sq_linear(f, spacing);
  if (s == 0.0) return std::sqrt(l2);

  const std::size_t cells = f.size() - 1;
  const double d = spacing;
  const double p = 1.0 - 2.0 * s;
  std::vector<double> slope(cells);
  for (std::size_t i = 0; i < cells; ++i) slope[i] = (f[i + 1] - f[i]) / d;

  // Self cells: slope^2 iint |x-y|^{1-2s} over the cell square.
  double semi = 0.0;
  const double self_w = 2.0 * std::pow(d, p + 2.0) / ((p + 1.0) * (p + 2.0));
  for (std::size_t i = 0; i < cells; ++i) semi += slope[i] * slope[i] * self_w;

  // Adjacent cells: exact piecewise-linear integrals via the unit square
  // weights; factor 2 restores both orderings of the double integral.
  AdjacentWeights aw = adjacent_weights(s);
  const double scale = std::pow(d, 3.0 - 2.0 * s);
  for (std::size_t i = 0; i + 1 < cells; ++i) {
    double gl = slope[i], gr = slope[i + 1];
    semi += 2.0 * scale * ((gl * gl + gr * gr) * aw.a1 + 2.0 * gl * gr * aw.b1);
  }

  // Separated cells: freeze f at the cell midpoints against the exact kernel
  // pair weight.
  for (std::size_t i = 0; i + 2 < cells; ++i) {
    double fi = (f[i] + f[i + 1]) / 2.0;
    double a0 = static_cast<double>(i) * d, a1 = a0 + d;
    for (std::size_t j = i + 2; j < cells; ++j) {
      double fj = (f[j] + f[j + 1]) / 2.0;
      double diff = fi - fj;
      if (diff == 0.0) continue;
      double b0 = static_cast<double>(j) * d;
      semi += 2.0 * diff * diff * quad::gagliardo_pair_weight(a0, a1, b0, b0 + d, s);
    }
  }
  return std::sqrt(l2 + semi);
}

C0Report nondegeneracy_check(const cov::CovarianceSpec& spec, double beta,
                             const GridSpec& grid) {
  if (!(beta > 0.0) || !(beta < 1.0))
    throw validation_error("potential: beta must lie in (0,1)");
  const double s_beta = (1.0 - beta * beta) / 2.0;
  PotentialOperator op = build_G(beta * beta, grid, spec);
  const std::size_t m = op.size();
  const double delta = grid.delta();
  const double length = delta * static_cast<double>(m - 1);

  std::vector<std::vector<double>> psis;
  for (int k = 0; k < 64; ++k) {
    std::vector<double> psi(m);
    for (std::size_t i = 0; i < m; ++i)
      psi[i] = std::cos(k * kPi * (static_cast<double>(i) * delta) / length);
    psis.push_back(std::move(psi));
  }
  rng::NormalStream draws(424242, 0);
  for (int r = 0; r < 200; ++r) {
    std::vector<double> psi(m, 0.0);
    for (int k = 0; k <= 8; ++k) {
      double a = draws.normal() / (1.0 + k * k);
      double b = draws.normal() / (1.0 + k * k);
      for (std::size_t i = 0; i < m; ++i) {
        double x = static_cast<double>(i) * delta;
        psi[i] += a * std::cos(k * kPi * x / length) +
                  b * std::sin(k * kPi * x / length);
      }
    }
    psis.push_back(std::move(psi));
  }

  C0Report rep;
  bool first = true;
  for (const auto& psi : psis) {
    std::vector<double> gpsi = op.apply(psi);
    double q = 0.0;
    for (std::size_t i = 0; i < m; ++i) q += psi[i] * gpsi[i];
    q *= delta;
    double dual = sobolev_norm(psi, delta, -s_beta);
    if (!(dual > 0.0)) continue;
    double quotient = q / (dual * dual);
    if (first || quotient < rep.c0) {
      rep.c0 = quotient;
      rep.witness = psi;
      rep.quotient_at_witness = quotient;
      first = false;
    }
  }
  rep.violated = rep.c0 < 0.0;
  return rep;
}

void write_potential_operator(std::ostream& os, const PotentialOperator& op,
                              const cov::CovarianceSpec& spec) {
  nlohmann::json header;
  header["alpha"] = op.alpha;
  header["grid"] = {{"T", op.grid.T}, {"n_points", op.grid.n_points}};
  header["spec_hash"] = hashing::fnv1a_hex(spec.to_text());
  os << header.dump() << "\n";
  for (Eigen::Index i = 0; i < op.matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < op.matrix.cols(); ++j) {
      if (j) os << ' ';
      os << g17(op.matrix(i, j));
    }
    os << "\n";
  }
}

}  // namespace gmclab::potential
