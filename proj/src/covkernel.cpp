#include "gmclab/covkernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <sstream>

#include "gmclab/quadrature.hpp"

namespace gmclab::cov {

namespace {

constexpr double kPi = 3.14159265358979323846;

// C-infinity bump on [-1/2, 1/2], unnormalized.
double raw_bump(double x) {
  double t = 2.0 * x;
  double s = 1.0 - t * t;
  if (s <= 0.0) return 0.0;
  return std::exp(-1.0 / s);
}

// Cosine spectrum of an even density sampled on [-1,1]; returns min/max ratio.
double spectrum_ratio(const std::function<double(double)>& density) {
  const int n = 2048;
  const double dx = 2.0 / n;
  std::vector<double> samples(n);
  for (int i = 0; i < n; ++i) samples[i] = density(-1.0 + (i + 0.5) * dx);
  double mn = std::numeric_limits<double>::infinity(), mx = 0.0;
  // Frequencies up to a few times the reciprocal sample spacing are enough to
  // expose the truncation ringing that matters at the smoothing scales in use.
  for (int m = 0; m < n / 2; ++m) {
    double xi = kPi * m / 2.0;  // grid of spacing pi/2 spans [0, pi*n/4]
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      double x = -1.0 + (i + 0.5) * dx;
      acc += samples[i] * std::cos(xi * x);
    }
    acc *= dx;
    mn = std::min(mn, acc);
    mx = std::max(mx, acc);
  }
  return mn / mx;
}

}  // namespace

Mollifier Mollifier::bump_selfconvolution() {
  // The convolution table is expensive; build it once and share it.
  static const Mollifier cached = [] {
  Mollifier m;
  m.family_ = MollifierFamily::BumpSelfConvolution;
  // Normalize the base bump, then tabulate its self-convolution on [0,1].
  double base_mass = quad::integrate_adaptive(raw_bump, -0.5, 0.5, 1e-14);
  auto conv = [base_mass](double w) {
    double lo = std::max(-0.5, w - 0.5);
    double hi = std::min(0.5, w + 0.5);
    if (hi <= lo) return 0.0;
    auto f = [w](double a) { return raw_bump(a) * raw_bump(w - a); };
    return quad::integrate_adaptive(f, lo, hi, 1e-14) / (base_mass * base_mass);
  };
  const int npts = 4097;
  std::vector<double> tab(npts);
  for (int i = 0; i < npts; ++i) tab[i] = conv(static_cast<double>(i) / (npts - 1));
  auto spline = std::make_shared<interp::CubicSpline>(0.0, 1.0, std::move(tab));
  m.table_ = spline;
  // Renormalize by the table's own integral so downstream quadrature sees a
  // density with unit mass to machine precision.
  auto dens = [&spline](double u) { return (*spline)(std::fabs(u)); };
  m.norm_ = quad::integrate_adaptive(dens, -1.0, 1.0, 1e-14);
  return m;
  }();
  return cached;
}

Mollifier Mollifier::truncated_gaussian(double sigma) {
  if (!(sigma > 0.0) || sigma > 0.5)
    throw validation_error("mollifier: truncated Gaussian sigma must lie in (0, 0.5]");
  Mollifier m;
  m.family_ = MollifierFamily::TruncatedGaussian;
  m.sigma_ = sigma;
  m.norm_ = sigma * std::sqrt(2.0 * kPi) * std::erf(1.0 / (sigma * std::sqrt(2.0)));
  return m;
}

std::string Mollifier::name() const {
  return family_ == MollifierFamily::BumpSelfConvolution ? "bump_selfconv"
                                                         : "trunc_gauss";
}

double Mollifier::density(double u) const {
  double a = std::fabs(u);
  if (a >= 1.0) return 0.0;
  if (family_ == MollifierFamily::BumpSelfConvolution) return (*table_)(a) / norm_;
  return std::exp(-0.5 * u * u / (sigma_ * sigma_)) / norm_;
}

double Mollifier::integral() const {
  return quad::integrate_adaptive([this](double u) { return density(u); }, -1.0, 1.0,
                                  1e-13);
}

double Mollifier::min_spectrum_ratio() const {
  return spectrum_ratio([this](double u) { return density(u); });
}

void Mollifier::validate() const {
  std::vector<std::string> bad;
  double mass = integral();
  if (std::fabs(mass - 1.0) > 1e-10)
    bad.push_back("mollifier: density does not integrate to 1 (got " +
                  std::to_string(mass) + ")");
  double ratio = min_spectrum_ratio();
  if (ratio < -1e-4)
    bad.push_back("mollifier: sampled spectrum dips negative (min/max " +
                  std::to_string(ratio) + "), not positive definite");
  if (!bad.empty()) throw validation_error(bad);
}

HTable HTable::from_table(double radius, std::vector<double> values) {
  if (!(radius > 0.0)) throw validation_error("h table: radius must be positive");
  if (values.size() < 1025)
    throw validation_error("h table: need at least 1025 points");
  if (values.size() % 2 == 0)
    throw validation_error("h table: need an odd point count (node at 0)");
  // Evenness is enforced, not assumed: h(u) := (h(u) + h(-u)) / 2.
  const std::size_t n = values.size();
  for (std::size_t i = 0; i < n / 2; ++i) {
    double avg = 0.5 * (values[i] + values[n - 1 - i]);
    values[i] = avg;
    values[n - 1 - i] = avg;
  }
  HTable h;
  h.zero_ = false;
  h.radius_ = radius;
  h.spline_ = std::make_shared<interp::CubicSpline>(-radius, radius, values);
  h.values_ = std::move(values);
  return h;
}

double HTable::operator()(double u) const {
  if (zero_) return 0.0;
  double r = std::fabs(u);
  if (r >= radius_) return 0.0;
  // Evaluating at |u| makes evenness exact; the symmetrized table alone
  // still leaves last-ulp asymmetry in the spline arithmetic.
  return (*spline_)(r);
}

void CovarianceSpec::validate() const {
  std::vector<std::string> bad;
  if (!(T > 0.0)) bad.push_back("covariance: T must be positive");
  if (!(beta > 0.0) || !(beta < 1.0))
    bad.push_back("covariance: beta must lie in (0,1)");
  if (!h.is_zero() && h.radius() >= T)
    bad.push_back("covariance: h support must lie within (-T, T)");
  try {
    mollifier.validate();
  } catch (const validation_error& e) {
    for (const auto& v : e.violations()) bad.push_back(v);
  }
  if (!bad.empty()) throw validation_error(bad);
}

namespace {

std::string fmt_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string CovarianceSpec::to_text() const {
  std::ostringstream os;
  os << "T " << fmt_exact(T) << "\n";
  os << "beta " << fmt_exact(beta) << "\n";
  os << "mollifier " << mollifier.name() << "\n";
  if (mollifier.family() == MollifierFamily::TruncatedGaussian)
    os << "mollifier_sigma " << fmt_exact(mollifier.sigma()) << "\n";
  if (h.is_zero()) {
    os << "h zero\n";
  } else {
    os << "h table\n";
    os << "h_radius " << fmt_exact(h.radius()) << "\n";
    os << "h_points " << h.values().size() << "\n";
    for (double v : h.values()) os << "h_value " << fmt_exact(v) << "\n";
  }
  return os.str();
}

CovarianceSpec CovarianceSpec::from_text(const std::string& text) {
  std::istringstream is(text);
  std::string key;
  CovarianceSpec spec;
  bool have_h_table = false;
  double h_radius = 0.0;
  std::size_t h_points = 0;
  std::vector<double> h_values;
  std::string mollifier_name = "bump_selfconv";
  double mollifier_sigma = 0.2;
  while (is >> key) {
    if (key == "T") {
      is >> spec.T;
    } else if (key == "beta") {
      is >> spec.beta;
    } else if (key == "mollifier") {
      is >> mollifier_name;
    } else if (key == "mollifier_sigma") {
      is >> mollifier_sigma;
    } else if (key == "h") {
      std::string kind;
      is >> kind;
      have_h_table = (kind == "table");
      if (kind != "table" && kind != "zero")
        throw validation_error("covariance text: h must be 'zero' or 'table'");
    } else if (key == "h_radius") {
      is >> h_radius;
    } else if (key == "h_points") {
      is >> h_points;
      h_values.reserve(h_points);
    } else if (key == "h_value") {
      double v;
      is >> v;
      h_values.push_back(v);
    } else {
      throw validation_error("covariance text: unknown key '" + key + "'");
    }
  }
  if (mollifier_name == "bump_selfconv")
    spec.mollifier = Mollifier::bump_selfconvolution();
  else if (mollifier_name == "trunc_gauss")
    spec.mollifier = Mollifier::truncated_gaussian(mollifier_sigma);
  else
    throw validation_error("covariance text: unknown mollifier '" + mollifier_name + "'");
  if (have_h_table) {
    if (h_values.size() != h_points)
      throw validation_error("covariance text: h table point count mismatch");
    spec.h = HTable::from_table(h_radius, std::move(h_values));
  }
  return spec;
}

double cov_exact(const CovarianceSpec& spec, double x, double y) {
  if (x < 0.0 || x > spec.T || y < 0.0 || y > spec.T)
    throw validation_error("cov_exact: arguments must lie in [0, T]");
  double d = x - y;
  if (d == 0.0) return std::numeric_limits<double>::infinity();
  return std::log(1.0 / std::fabs(d)) + spec.h(d);
}

CovEvaluator::CovEvaluator(CovarianceSpec spec, double tol)
    : spec_(std::move(spec)), tol_(tol) {
  spec_.validate();
}

const CovEvaluator::QTable& CovEvaluator::q_table(double e1, double e2) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto key = std::minmax(e1, e2);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;

  // Difference density q(w) = (theta_e1 * theta_e2)(w): smooth, even,
  // supported on [-(e1+e2), e1+e2].  Tabulated once per scale pair.
  const double half = e1 + e2;
  const Mollifier& th = spec_.mollifier;
  auto q_of = [&](double w) {
    double lo = std::max(-e1, w - e2);
    double hi = std::min(e1, w + e2);
    if (hi <= lo) return 0.0;
    auto f = [&](double a) {
      return th.density(a / e1) / e1 * th.density((w - a) / e2) / e2;
    };
    double acc = 0.0;
    const int pieces = 4;
    for (int p = 0; p < pieces; ++p) {
      double a = lo + (hi - lo) * p / pieces;
      double b = lo + (hi - lo) * (p + 1) / pieces;
      acc += quad::integrate(f, a, b, 24);
    }
    return acc;
  };
  const int npts = 2049;
  std::vector<double> tab(npts);
  for (int i = 0; i < npts; ++i)
    tab[i] = q_of(half * static_cast<double>(i) / (npts - 1));
  QTable qt;
  qt.half = half;
  qt.q = interp::CubicSpline(0.0, half, std::move(tab));
  return cache_.emplace(key, std::move(qt)).first->second;
}

CovValue CovEvaluator::cov(double x, double y, double eps1, double eps2) const {
  if (x < 0.0 || x > spec_.T || y < 0.0 || y > spec_.T)
    throw validation_error("cov_mollified: arguments must lie in [0, T]");
  if (!(eps1 > 0.0) || !(eps2 > 0.0))
    throw validation_error("cov_mollified: smoothing scales must be positive");
  const QTable& qt = q_table(eps1, eps2);
  const double d = y - x;
  auto q_even = [&qt](double w) { return qt.q(std::fabs(w)); };

  auto log_part = quad::integrate_against_log(q_even, -qt.half, qt.half, d, tol_);
  CovValue out;
  out.value = log_part.value;
  out.error_estimate = log_part.error_estimate;

  if (!spec_.h.is_zero()) {
    double h_err = 0.0;
    double h_part = quad::integrate_adaptive(
        [&](double w) { return q_even(w) * spec_.h(d - w); }, -qt.half, qt.half,
        tol_, &h_err);
    out.value += h_part;
    out.error_estimate += h_err;
  }
  return out;
}

double CovEvaluator::variance(double eps) const {
  // Smoothed variance is independent of position; evaluate at the difference 0.
  const QTable& qt = q_table(eps, eps);
  auto q_even = [&qt](double w) { return qt.q(std::fabs(w)); };
  auto log_part = quad::integrate_against_log(q_even, -qt.half, qt.half, 0.0, tol_);
  double v = log_part.value;
  if (!spec_.h.is_zero()) {
    v += quad::integrate_adaptive([&](double w) { return q_even(w) * spec_.h(-w); },
                                  -qt.half, qt.half, tol_);
  }
  return v;
}

CovValue cov_mollified(const CovarianceSpec& spec, double x, double y, double eps1,
                       double eps2) {
  CovEvaluator ev(spec);
  return ev.cov(x, y, eps1, eps2);
}

double var_mollified(const CovarianceSpec& spec, double eps) {
  CovEvaluator ev(spec);
  return ev.variance(eps);
}

namespace {

// Smooth transition equal to 1 at t <= 0 and 0 at t >= 1.
double smoothstep_down(double t) {
  if (t <= 0.0) return 1.0;
  if (t >= 1.0) return 0.0;
  auto sigma = [](double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; };
  return sigma(1.0 - t) / (sigma(1.0 - t) + sigma(t));
}

double freq_bump(double t) {
  double s = 1.0 - t * t;
  if (s <= 0.0) return 0.0;
  return std::exp(1.0 - 1.0 / s);
}

}  // namespace

NondegenerateBuild build_nondegenerate_h(double T, double r_cut, int grid_log2) {
  if (!(T > 0.0)) throw validation_error("build_nondegenerate_h: T must be positive");
  if (r_cut < T)
    throw validation_error("build_nondegenerate_h: cutoff radius must cover the domain");
  if (grid_log2 < 8 || grid_log2 > 16)
    throw validation_error("build_nondegenerate_h: grid_log2 out of range [8,16]");

  const int n = 1 << grid_log2;
  const double cutoff = 4.0 * r_cut;   // psi0 = 1 on [-cutoff, cutoff]
  const double outer = 5.0 * r_cut;    // psi0 supported in [-outer, outer]
  const double L = 16.0 * r_cut;
  const double dx = L / n;

  auto psi0 = [&](double x) {
    return smoothstep_down((std::fabs(x) - cutoff) / (outer - cutoff));
  };

  // Cell-averaged samples of psi0(x) log(1/|x|); the log average is exact so
  // the singular cell carries its true (finite) mass.
  std::vector<double> xs(n), kernel(n);
  auto log_avg = [&](double a, double b) {
    // (1/(b-a)) \int_a^b log(1/|x|) dx with antiderivative x - x log|x|.
    auto anti = [](double x) {
      if (x == 0.0) return 0.0;
      return x - x * std::log(std::fabs(x));
    };
    return (anti(b) - anti(a)) / (b - a);
  };
  for (int i = 0; i < n; ++i) {
    double x = (i - n / 2) * dx;
    xs[i] = x;
    kernel[i] = psi0(x) * log_avg(x - 0.5 * dx, x + 0.5 * dx);
  }

  // Direct cosine transform of the (even) sample vector.
  auto spectrum_of = [&](const std::vector<double>& k) {
    std::vector<double> spec(n / 2 + 1);
    for (int m = 0; m <= n / 2; ++m) {
      double xi = 2.0 * kPi * m / L;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * std::cos(xi * xs[i]);
      spec[m] = acc * dx;
    }
    return spec;
  };

  std::vector<double> base_spec = spectrum_of(kernel);
  double raw_margin = *std::min_element(base_spec.begin(), base_spec.end());

  NondegenerateBuild out;
  out.raw_margin = raw_margin;
  out.cutoff_radius = cutoff;
  out.grid_points = n;

  const double h_radius = 0.95 * T;
  const double taper_start = 0.8 * h_radius;

  double width = 40.0 / T;
  double amplitude = std::max(1.0, -raw_margin) * 1.5;
  const int table_n = 2049;

  for (int attempt = 0; attempt < 24; ++attempt) {
    // Candidate h from the frequency bump, tapered to compact support.
    auto h_of = [&](double u) {
      if (std::fabs(u) >= h_radius) return 0.0;
      double acc = 0.0;
      for (int m = 0; m <= n / 2; ++m) {
        double xi = 2.0 * kPi * m / L;
        double r = amplitude * freq_bump(xi / width);
        if (r == 0.0 && m > 0) break;  // bump support exhausted
        double term = r * std::cos(xi * u);
        acc += (m == 0) ? 0.5 * term : term;  // cosine series with halved DC
      }
      acc *= 2.0 / L;
      double taper =
          smoothstep_down((std::fabs(u) - taper_start) / (h_radius - taper_start));
      return acc * taper;
    };

    std::vector<double> h_tab(table_n);
    for (int i = 0; i < table_n; ++i) {
      double u = -h_radius + 2.0 * h_radius * i / (table_n - 1);
      h_tab[i] = h_of(u);
    }
    HTable h = HTable::from_table(h_radius, h_tab);

    // Margin is judged on the final tabulated h, exactly as a consumer of the
    // spec would recompute it.
    std::vector<double> lifted(n);
    for (int i = 0; i < n; ++i) lifted[i] = kernel[i] + h(xs[i]);
    std::vector<double> spec = spectrum_of(lifted);
    double margin = *std::min_element(spec.begin(), spec.end());

    if (margin >= 0.0) {
      out.h = h;
      out.spectral_margin = margin;
      out.bump_amplitude = amplitude;
      out.bump_width = width;
      return out;
    }
    amplitude *= 1.5;
    if (attempt % 3 == 2) width *= 1.3;
  }
  throw numerical_error(
      "build_nondegenerate_h: could not lift the kernel spectrum to nonnegative "
      "values within the search budget");
}

}  // namespace gmclab::cov
