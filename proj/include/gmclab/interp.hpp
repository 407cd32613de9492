#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace gmclab::interp {

// Natural cubic spline over a uniform grid on [a, b].
class CubicSpline {
 public:
  CubicSpline() = default;

  CubicSpline(double a, double b, std::vector<double> values)
      : a_(a), b_(b), y_(std::move(values)) {
    if (y_.size() < 4) throw std::invalid_argument("CubicSpline: need at least 4 points");
    if (!(b > a)) throw std::invalid_argument("CubicSpline: empty interval");
    h_ = (b_ - a_) / static_cast<double>(y_.size() - 1);
    build();
  }

  double operator()(double x) const {
    if (y_.empty()) throw std::logic_error("CubicSpline: empty");
    if (x <= a_) x = a_;
    if (x >= b_) x = b_;
    auto n = y_.size();
    auto i = static_cast<std::size_t>((x - a_) / h_);
    if (i >= n - 1) i = n - 2;
    double t = (x - (a_ + h_ * static_cast<double>(i))) / h_;
    double y0 = y_[i], y1 = y_[i + 1], m0 = m_[i], m1 = m_[i + 1];
    double u = 1.0 - t;
    return u * y0 + t * y1 +
           h_ * h_ / 6.0 * ((u * u * u - u) * m0 + (t * t * t - t) * m1);
  }

  double lo() const { return a_; }
  double hi() const { return b_; }
  const std::vector<double>& values() const { return y_; }

 private:
  void build() {
    // Thomas algorithm on the (1,4,1) system for the interior second
    // derivatives; natural ends m_0 = m_{n-1} = 0.
    auto n = y_.size();
    m_.assign(n, 0.0);
    std::vector<double> rhs(n, 0.0), upper(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i)
      rhs[i] = 6.0 * (y_[i + 1] - 2.0 * y_[i] + y_[i - 1]) / (h_ * h_);
    double beta = 4.0;
    m_[1] = rhs[1] / beta;
    for (std::size_t i = 2; i + 1 < n; ++i) {
      upper[i - 1] = 1.0 / beta;
      beta = 4.0 - upper[i - 1];
      m_[i] = (rhs[i] - m_[i - 1]) / beta;
    }
    for (std::size_t i = n - 2; i-- > 1;) m_[i] -= upper[i] * m_[i + 1];
  }

  double a_ = 0.0, b_ = 0.0, h_ = 0.0;
  std::vector<double> y_;
  std::vector<double> m_;
};

// Chebyshev interpolant of a smooth function on [a, b]; evaluation by the
// Clenshaw recurrence.  Used to cache expensive smooth kernels.
class Chebyshev {
 public:
  Chebyshev() = default;

  Chebyshev(const std::function<double(double)>& f, double a, double b, int n)
      : a_(a), b_(b), coef_(static_cast<std::size_t>(n), 0.0) {
    if (n < 2) throw std::invalid_argument("Chebyshev: need n >= 2");
    const double pi = 3.14159265358979323846;
    std::vector<double> fx(n);
    for (int k = 0; k < n; ++k) {
      double theta = pi * (k + 0.5) / n;
      double x = 0.5 * (a + b) + 0.5 * (b - a) * std::cos(theta);
      fx[k] = f(x);
    }
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += fx[k] * std::cos(pi * j * (k + 0.5) / n);
      coef_[j] = 2.0 / n * s;
    }
  }

  double operator()(double x) const {
    double t = (2.0 * x - a_ - b_) / (b_ - a_);
    if (t < -1.0) t = -1.0;
    if (t > 1.0) t = 1.0;
    double b1 = 0.0, b2 = 0.0;
    for (std::size_t j = coef_.size(); j-- > 1;) {
      double b0 = 2.0 * t * b1 - b2 + coef_[j];
      b2 = b1;
      b1 = b0;
    }
    return t * b1 - b2 + 0.5 * coef_[0];
  }

  double tail_magnitude(int count = 3) const {
    double m = 0.0;
    for (int k = 0; k < count && k < static_cast<int>(coef_.size()); ++k)
      m = std::max(m, std::fabs(coef_[coef_.size() - 1 - k]));
    return m;
  }

 private:
  double a_ = -1.0, b_ = 1.0;
  std::vector<double> coef_;
};

}  // namespace gmclab::interp
