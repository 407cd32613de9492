#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "gmclab/rng.hpp"

namespace gmclab::stats {

// Sufficient statistics of a sample batch.  Reductions always follow the
// canonical binary tree over the index range, so aggregating [0,n) directly
// and merging the aggregates of [0,split(n)) and [split(n),n) produce
// bit-identical results regardless of thread count.
struct Moments {
  std::size_t n = 0;
  double sum = 0.0;
  double sum_sq = 0.0;
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();

  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  double variance() const {
    if (n < 2) return 0.0;
    double m = mean();
    double v = (sum_sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
    return v > 0.0 ? v : 0.0;
  }
  double std_error() const {
    return n ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
  }
};

inline Moments merge(const Moments& a, const Moments& b) {
  Moments out;
  out.n = a.n + b.n;
  out.sum = a.sum + b.sum;
  out.sum_sq = a.sum_sq + b.sum_sq;
  out.min = std::min(a.min, b.min);
  out.max = std::max(a.max, b.max);
  return out;
}

// Largest power of two strictly less than n (the canonical split point).
inline std::size_t canonical_split(std::size_t n) {
  std::size_t s = 1;
  while (s * 2 < n) s *= 2;
  return s;
}

inline Moments reduce_moments(std::span<const double> xs) {
  if (xs.empty()) return {};
  if (xs.size() == 1) {
    Moments m;
    m.n = 1;
    m.sum = xs[0];
    m.sum_sq = xs[0] * xs[0];
    m.min = m.max = xs[0];
    return m;
  }
  std::size_t s = canonical_split(xs.size());
  return merge(reduce_moments(xs.first(s)), reduce_moments(xs.subspan(s)));
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};

// Percentile bootstrap for the mean of an arbitrary transform of the sample.
inline Interval bootstrap_mean_ci(std::span<const double> xs, std::uint64_t seed,
                                  int resamples = 1000, double level = 0.95) {
  if (xs.size() < 2) throw std::invalid_argument("bootstrap needs at least 2 values");
  rng::NormalStream rs(seed, 0xB007);
  std::vector<double> means;
  means.reserve(resamples);
  const std::size_t n = xs.size();
  for (int b = 0; b < resamples; ++b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = static_cast<std::size_t>(rs.raw() % n);
      acc += xs[j];
    }
    means.push_back(acc / static_cast<double>(n));
  }
  std::sort(means.begin(), means.end());
  double tail = (1.0 - level) / 2.0;
  auto pick = [&](double q) {
    double pos = q * static_cast<double>(means.size() - 1);
    std::size_t i = static_cast<std::size_t>(pos);
    double frac = pos - static_cast<double>(i);
    if (i + 1 >= means.size()) return means.back();
    return means[i] * (1.0 - frac) + means[i + 1] * frac;
  };
  return {pick(tail), pick(1.0 - tail)};
}

// Two-sample Kolmogorov-Smirnov statistic sup_x |F1 - F2|.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

// Critical value for the two-sample KS test at significance alpha.
inline double ks_critical(double alpha, std::size_t n, std::size_t m) {
  double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c * std::sqrt(static_cast<double>(n + m) /
                       (static_cast<double>(n) * static_cast<double>(m)));
}

// Empirical Ky Fan metric: smallest delta with P(d > delta) <= delta.
inline double ky_fan(std::vector<double> d) {
  if (d.empty()) throw std::invalid_argument("ky_fan: empty sample");
  std::sort(d.begin(), d.end());
  const double m = static_cast<double>(d.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j <= d.size(); ++j) {
    double tail = (m - static_cast<double>(j)) / m;   // P(d > delta) on [d_j, d_{j+1})
    double lo = (j == 0) ? 0.0 : d[j - 1];
    double hi = (j == d.size()) ? std::numeric_limits<double>::infinity() : d[j];
    double cand = std::max(lo, tail);
    if (cand <= hi) best = std::min(best, cand);
  }
  return best;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line: need matching samples of size >= 2");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  double denom = n * sxx - sx * sx;
  if (std::fabs(denom) < 1e-300) throw std::invalid_argument("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  double ss_tot = syy - sy * sy / n;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
  }
  f.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

}  // namespace gmclab::stats
