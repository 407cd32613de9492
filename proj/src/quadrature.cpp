#include "gmclab/quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>

namespace gmclab::quad {

namespace {

GaussRule make_gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  const double pi = 3.14159265358979323846;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      // Legendre recurrence for P_n(x) and P_n'(x).
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    r.x[i] = -x;
    r.x[n - 1 - i] = x;
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.w[i] = w;
    r.w[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.x[n / 2] = 0.0;
  return r;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
  static std::map<int, GaussRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_gauss_legendre(n)).first;
  return it->second;
}

GaussRule gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: order must be >= 1");
  // Golub-Welsch on the Jacobi matrix of the monic Hermite recurrence
  // x h_k = h_{k+1} + k h_{k-1}: zero diagonal, off-diagonal sqrt(k).
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    double b = std::sqrt(static_cast<double>(k));
    J(k, k - 1) = b;
    J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    r.x[i] = es.eigenvalues()(i);
    double v0 = es.eigenvectors()(0, i);
    r.w[i] = v0 * v0;  // total mass of N(0,1) is 1
  }
  return r;
}

double integrate(const std::function<double(double)>& f, double a, double b, int order) {
  const GaussRule& g = gauss_legendre(order);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double acc = 0.0;
  for (std::size_t i = 0; i < g.x.size(); ++i) acc += g.w[i] * f(mid + half * g.x[i]);
  return acc * half;
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double tol, double* error_estimate) {
  double prev = integrate(f, a, b, 16);
  int cells = 2;
  double cur = prev, err = std::fabs(prev);
  for (int level = 0; level < 14; ++level) {
    cur = 0.0;
    double width = (b - a) / cells;
    for (int c = 0; c < cells; ++c)
      cur += integrate(f, a + c * width, a + (c + 1) * width, 16);
    err = std::fabs(cur - prev);
    // Tolerance scales with the result so large-magnitude integrands terminate.
    if (err <= tol * (1.0 + std::fabs(cur))) break;
    prev = cur;
    cells *= 2;
  }
  if (error_estimate) *error_estimate = err;
  return cur;
}

void log_moments(double c, double t0, double t1, int max_j, double* out) {
  // Antiderivative of u^j log|u - c|:
  //   P_j(u) = (u^{j+1} - c^{j+1}) / (j+1) * log|u - c| - Q_j(u) / (j+1),
  //   Q_j(u) = sum_{i=0}^{j} c^{j-i} u^{i+1} / (i+1),
  // continuous through u = c (the bracketed term vanishes there).
  auto eval = [c](int j, double u) {
    double du = u - c;
    double cp = 1.0;  // c^{j+1}
    double up = 1.0;  // u^{j+1}
    for (int k = 0; k <= j; ++k) {
      cp *= c;
      up *= u;
    }
    double lead = (du == 0.0) ? 0.0 : (up - cp) * std::log(std::fabs(du));
    double q = 0.0;
    double cpow = 1.0;  // c^{j-i}, built backwards
    // Q_j(u) = sum_i c^{j-i} u^{i+1}/(i+1); iterate i from j down to 0.
    for (int i = j; i >= 0; --i) {
      double upow = 1.0;
      for (int k = 0; k <= i; ++k) upow *= u;
      q += cpow * upow / (i + 1);
      cpow *= c;
    }
    return (lead - q) / (j + 1);
  };
  for (int j = 0; j <= max_j; ++j) out[j] = eval(j, t1) - eval(j, t0);
}

double power_cell_integral(double z, double a, double b, double alpha) {
  if (b < a) throw std::invalid_argument("power_cell_integral: empty cell");
  if (alpha < 0.0 || alpha >= 1.0)
    throw std::invalid_argument("power_cell_integral: alpha must lie in [0,1)");
  const double e = 1.0 - alpha;
  auto pw = [e](double t) { return std::pow(t, e); };
  if (z <= a) return (pw(b - z) - pw(a - z)) / e;
  if (z >= b) return (pw(z - a) - pw(z - b)) / e;
  return (pw(z - a) + pw(b - z)) / e;
}

double gagliardo_pair_weight(double a0, double a1, double b0, double b1, double s) {
  if (a1 > b0 + 1e-15 * std::fabs(b0))
    throw std::invalid_argument("gagliardo_pair_weight: cells must be ordered left-to-right");
  auto k2 = [s](double u) {
    if (u <= 0.0) {
      // Touching corner: finite only below s = 1/2.
      return (s < 0.5) ? 0.0 : std::numeric_limits<double>::infinity();
    }
    if (std::fabs(s - 0.5) < 1e-12) return -std::log(u);
    return std::pow(u, 1.0 - 2.0 * s) / ((-2.0 * s) * (1.0 - 2.0 * s));
  };
  return k2(b1 - a0) - k2(b1 - a1) - k2(b0 - a0) + k2(b0 - a1);
}

namespace {

constexpr int kProductNodes = 10;

// Chebyshev nodes on [-1,1] and the (precomputed) map from nodal values to
// monomial coefficients of the degree-9 interpolant.
struct ProductBasis {
  double nodes[kProductNodes];
  double to_monomial[kProductNodes][kProductNodes];

  ProductBasis() {
    const long double pi = 3.14159265358979323846264338328L;
    long double v[kProductNodes][kProductNodes];
    long double inv[kProductNodes][kProductNodes];
    for (int i = 0; i < kProductNodes; ++i) {
      long double x = std::cos(pi * (2 * i + 1) / (2 * kProductNodes));
      nodes[i] = static_cast<double>(x);
      long double p = 1.0L;
      for (int j = 0; j < kProductNodes; ++j) {
        v[i][j] = p;
        p *= x;
      }
    }
    // Invert the Vandermonde by Gauss-Jordan in extended precision.
    for (int i = 0; i < kProductNodes; ++i)
      for (int j = 0; j < kProductNodes; ++j) inv[i][j] = (i == j) ? 1.0L : 0.0L;
    for (int col = 0; col < kProductNodes; ++col) {
      int piv = col;
      for (int rr = col + 1; rr < kProductNodes; ++rr)
        if (std::fabs(static_cast<double>(v[rr][col])) >
            std::fabs(static_cast<double>(v[piv][col])))
          piv = rr;
      std::swap(v[piv], v[col]);
      std::swap(inv[piv], inv[col]);
      long double d = v[col][col];
      for (int j = 0; j < kProductNodes; ++j) {
        v[col][j] /= d;
        inv[col][j] /= d;
      }
      for (int rr = 0; rr < kProductNodes; ++rr) {
        if (rr == col) continue;
        long double f = v[rr][col];
        if (f == 0.0L) continue;
        for (int j = 0; j < kProductNodes; ++j) {
          v[rr][j] -= f * v[col][j];
          inv[rr][j] -= f * inv[col][j];
        }
      }
    }
    // coefficients = V^{-1} * values; V maps coefficients to values.
    for (int i = 0; i < kProductNodes; ++i)
      for (int j = 0; j < kProductNodes; ++j)
        to_monomial[i][j] = static_cast<double>(inv[i][j]);
  }
};

const ProductBasis& product_basis() {
  static ProductBasis b;
  return b;
}

// One pass over [lo,hi] with the given cell count.
double log_pass(const std::function<double(double)>& g, double lo, double hi, double d,
                int cells) {
  const ProductBasis& basis = product_basis();
  const double width = (hi - lo) / cells;
  double acc = 0.0;
  for (int cidx = 0; cidx < cells; ++cidx) {
    const double w0 = lo + cidx * width;
    const double w1 = w0 + width;
    const double m = 0.5 * (w0 + w1), r = 0.5 * width;
    const double c = (d - m) / r;
    if (std::fabs(c) > 3.0) {
      // Singularity well outside: the integrand is smooth here.
      const GaussRule& gr = gauss_legendre(12);
      double cell = 0.0;
      for (std::size_t i = 0; i < gr.x.size(); ++i) {
        double w = m + r * gr.x[i];
        cell += gr.w[i] * g(w) * std::log(std::fabs(w - d));
      }
      acc -= cell * r;  // integral of g * log(1/|w-d|)
      continue;
    }
    // Product integration: interpolate g, integrate monomial x log exactly.
    double vals[kProductNodes];
    for (int i = 0; i < kProductNodes; ++i) vals[i] = g(m + r * basis.nodes[i]);
    double coef[kProductNodes];
    for (int i = 0; i < kProductNodes; ++i) {
      double s = 0.0;
      for (int j = 0; j < kProductNodes; ++j) s += basis.to_monomial[i][j] * vals[j];
      coef[i] = s;
    }
    double mom[kProductNodes];
    log_moments(c, -1.0, 1.0, kProductNodes - 1, mom);
    // log|w - d| = log r + log|u - c| on the cell.
    double poly_int = 0.0, logr_part = 0.0;
    for (int j = 0; j < kProductNodes; ++j) {
      double basic = (j % 2 == 0) ? 2.0 / (j + 1) : 0.0;  // \int_{-1}^{1} u^j du
      logr_part += coef[j] * basic;
      poly_int += coef[j] * mom[j];
    }
    acc -= r * (std::log(r) * logr_part + poly_int);
  }
  return acc;
}

}  // namespace

SingularIntegral integrate_against_log(const std::function<double(double)>& g,
                                       double lo, double hi, double d, double tol) {
  if (hi <= lo) return {0.0, 0.0};
  SingularIntegral out;
  double prev = log_pass(g, lo, hi, d, 8);
  double cur = prev;
  out.error_estimate = std::fabs(prev);
  for (int cells = 16; cells <= 4096; cells *= 2) {
    cur = log_pass(g, lo, hi, d, cells);
    out.error_estimate = std::fabs(cur - prev);
    if (out.error_estimate <= tol) break;
    prev = cur;
  }
  out.value = cur;
  return out;
}

}  // namespace gmclab::quad
