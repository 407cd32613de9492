#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "gmclab/covkernel.hpp"
#include "gmclab/fieldsim.hpp"
#include "gmclab/gmc.hpp"
#include "gmclab/quadrature.hpp"
#include "gmclab/stats.hpp"

using namespace gmclab;

namespace {

field::FieldSample make_sample(const GridSpec& g, double eps, double sigma2,
                               std::vector<double> vals) {
  field::FieldSample s;
  s.grid = g;
  s.eps_levels = {eps};
  s.sigma2 = {sigma2};
  s.values = {std::move(vals)};
  return s;
}

double median_abs(std::vector<double> v) {
  for (double& x : v) x = std::fabs(x);
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("cell masses follow the normalized exponential formula") {
  GridSpec grid{2.0, 5};  // delta = 0.5

  SUBCASE("constant path gives the closed form") {
    auto s = make_sample(grid, 0.02, 3.0, std::vector<double>(5, 1.25));
    auto m = gmc::gmc_from_field(s, 0, 0.5);
    double cell = std::exp(0.5 * 1.25 - 0.125 * 3.0) * 0.5;
    REQUIRE(m.cell_mass.size() == 4);
    for (double v : m.cell_mass) CHECK(v == doctest::Approx(cell).epsilon(1e-15));
    CHECK(m.total() == doctest::Approx(4.0 * cell).epsilon(1e-15));
  }

  SUBCASE("vanishing beta recovers Lebesgue cells") {
    auto s = make_sample(grid, 0.02, 5.0, {3.0, -2.0, 7.0, 0.0, 1.0});
    auto m = gmc::gmc_from_field(s, 0, 1e-300);
    for (double v : m.cell_mass) CHECK(v == 0.5);
    CHECK(m.total() == 2.0);
  }

  SUBCASE("preconditions are enforced") {
    auto s = make_sample(grid, 0.02, 5.0, std::vector<double>(5, 0.0));
    CHECK_THROWS_AS(gmc::gmc_from_field(s, 0, 0.0), validation_error);
    CHECK_THROWS_AS(gmc::gmc_from_field(s, 0, 1.0), validation_error);
    CHECK_THROWS_AS(gmc::gmc_from_field(s, 1, 0.5), validation_error);
  }
}

TEST_CASE("mean total and cell masses are Lebesgue within Monte Carlo error") {
  cov::CovarianceSpec spec;
  GridSpec grid{1.0, 101};
  const std::size_t N = 10000;
  field::FieldSampler sampler(grid, {0.02}, spec);

  stats::Moments total;
  stats::Moments cell0, cell50, cell99;
  for (std::size_t r = 0; r < N; ++r) {
    auto m = gmc::gmc_from_field(sampler.draw(21, r), 0, 0.5);
    for (double v : m.cell_mass) REQUIRE(v >= 0.0);
    auto add = [](stats::Moments& mo, double v) {
      mo.n++;
      mo.sum += v;
      mo.sum_sq += v * v;
    };
    add(total, m.total());
    add(cell0, m.cell_mass[0]);
    add(cell50, m.cell_mass[50]);
    add(cell99, m.cell_mass[99]);
  }
  CHECK(std::fabs(total.mean() - 1.0) <= 3.0 * total.std_error());
  const double delta = grid.delta();
  CHECK(std::fabs(cell0.mean() - delta) <= 4.0 * cell0.std_error());
  CHECK(std::fabs(cell50.mean() - delta) <= 4.0 * cell50.std_error());
  CHECK(std::fabs(cell99.mean() - delta) <= 4.0 * cell99.std_error());
}

TEST_CASE("second moment of total mass approaches the singular integral") {
  // Independent quadrature oracle for the limit: for beta = 0.5 and h = 0,
  // E[mu^2] -> int_0^1 int_0^1 |x-y|^{-1/4} dx dy = 2/((3/4)(7/4)) = 32/21.
  double oracle = quad::integrate_adaptive(
      [](double y) { return quad::power_cell_integral(y, 0.0, 1.0, 0.25); }, 0.0,
      1.0, 1e-10);
  const double limit = 32.0 / 21.0;
  CHECK(oracle == doctest::Approx(limit).epsilon(1e-9));

  cov::CovarianceSpec spec;
  GridSpec grid{1.0, 401};
  const std::size_t N = 12000;
  field::FieldSampler sampler(grid, {0.005}, spec);
  std::vector<double> sq(N);
  for (std::size_t r = 0; r < N; ++r) {
    double t = gmc::gmc_from_field(sampler.draw(31, r), 0, 0.5).total();
    sq[r] = t * t;
  }
  double est = stats::reduce_moments(sq).mean();
  CHECK(std::fabs(est - limit) <= 0.05 * limit);
}

TEST_CASE("negative moments stay finite with stable intervals across levels") {
  cov::CovarianceSpec spec;
  const std::size_t N = 4000;
  std::vector<gmc::MomentReport> reports;
  struct Cfg {
    double eps;
    std::size_t n_points;
  };
  for (auto cfg : {Cfg{0.02, 101}, Cfg{0.01, 201}}) {
    GridSpec grid{1.0, cfg.n_points};
    field::FieldSampler sampler(grid, {cfg.eps}, spec);
    std::vector<gmc::GmcMeasure> ms;
    ms.reserve(N);
    for (std::size_t r = 0; r < N; ++r)
      ms.push_back(gmc::gmc_from_field(sampler.draw(41, r), 0, 0.5));
    reports.push_back(gmc::total_mass_moment(ms, -1.0));
  }
  for (const auto& r : reports) {
    CHECK(std::isfinite(r.estimate));
    CHECK(r.estimate >= 1.0 - 0.05);  // Jensen: E[1/mu] >= 1/E[mu] = 1
    CHECK(r.ci_high - r.ci_low < 0.2 * r.estimate);
    CHECK(!r.divergence_warning);
  }
  // Stability: the two intervals overlap.
  CHECK(reports[0].ci_low <= reports[1].ci_high);
  CHECK(reports[1].ci_low <= reports[0].ci_high);
}

TEST_CASE("moment reports serialize to json with the pinned fields") {
  GridSpec grid{1.0, 5};
  std::vector<gmc::GmcMeasure> ms;
  for (int r = 0; r < 16; ++r) {
    auto s = make_sample(grid, 0.02, 2.0, std::vector<double>(5, 0.1 * r));
    ms.push_back(gmc::gmc_from_field(s, 0, 0.5));
  }
  auto rep = gmc::total_mass_moment(ms, 1.0, 777);
  auto j = nlohmann::json::parse(rep.to_json());
  CHECK(j["beta"].get<double>() == 0.5);
  CHECK(j["eps"].get<double>() == 0.02);
  CHECK(j["p"].get<double>() == 1.0);
  CHECK(j["estimate"].get<double>() == rep.estimate);
  CHECK(j["ci_low"].get<double>() == rep.ci_low);
  CHECK(j["ci_high"].get<double>() == rep.ci_high);
  CHECK(j["n_replicates"].get<std::size_t>() == 16);
  CHECK(j["seed"].get<std::uint64_t>() == 777);
  CHECK(rep.ci_low <= rep.estimate);
  CHECK(rep.estimate <= rep.ci_high);

  CHECK_THROWS_AS(gmc::total_mass_moment({}, 1.0), validation_error);
  CHECK_THROWS_AS(gmc::total_mass_moment(ms, 0.0), validation_error);
}

TEST_CASE("divergence warning trips at the moment threshold") {
  GridSpec grid{1.0, 5};
  std::vector<gmc::GmcMeasure> ms;
  for (int r = 0; r < 8; ++r) {
    auto s = make_sample(grid, 0.02, 2.0, std::vector<double>(5, 0.05 * r));
    ms.push_back(gmc::gmc_from_field(s, 0, 0.5));
  }
  CHECK(gmc::total_mass_moment(ms, 8.0).divergence_warning);    // 2/beta^2 = 8
  CHECK(!gmc::total_mass_moment(ms, 7.9).divergence_warning);
  CHECK(!gmc::total_mass_moment(ms, -3.0).divergence_warning);
}

TEST_CASE("holder modulus fit ranks regularity by beta") {
  GridSpec grid{1.0, 201};

  SUBCASE("lebesgue input fits a unit exponent") {
    std::vector<gmc::GmcMeasure> ms;
    for (int r = 0; r < 120; ++r) {
      auto s = make_sample(grid, 0.01, 1.0, std::vector<double>(201, 0.0));
      ms.push_back(gmc::gmc_from_field(s, 0, 1e-300));
    }
    auto fit = gmc::holder_modulus_fit(ms);
    CHECK(fit.eta == doctest::Approx(1.0).epsilon(0.05));
    CHECK(fit.r_squared > 0.999);
  }

  SUBCASE("larger beta produces a rougher measure") {
    cov::CovarianceSpec spec;
    field::FieldSampler sampler(grid, {0.01}, spec);
    std::vector<gmc::GmcMeasure> low, high;
    for (std::size_t r = 0; r < 150; ++r) {
      auto s = sampler.draw(51, r);
      low.push_back(gmc::gmc_from_field(s, 0, 0.3));
      high.push_back(gmc::gmc_from_field(s, 0, 0.7));
    }
    auto fit_low = gmc::holder_modulus_fit(low);
    auto fit_high = gmc::holder_modulus_fit(high);
    CHECK(fit_low.eta > 0.0);
    CHECK(fit_high.eta > 0.0);
    CHECK(fit_low.eta > fit_high.eta);
    CHECK(fit_low.r_squared > 0.5);
  }

  SUBCASE("too few measures are rejected") {
    std::vector<gmc::GmcMeasure> ms;
    for (int r = 0; r < 99; ++r) {
      auto s = make_sample(grid, 0.01, 1.0, std::vector<double>(201, 0.0));
      ms.push_back(gmc::gmc_from_field(s, 0, 0.5));
    }
    CHECK_THROWS_AS(gmc::holder_modulus_fit(ms), validation_error);
  }
}

TEST_CASE("negative-moment ordering across smoothing scales") {
  cov::CovarianceSpec spec;
  GridSpec grid{1.0, 401};

  SUBCASE("p = -1 ordering holds within CI slack") {
    auto rep = gmc::kahane_negative_moment_check(spec, grid, 0.5, 0.02, 0.005,
                                                 -1.0, 4000, 61);
    CHECK(rep.ordering_holds);
    CHECK(rep.coarse.estimate > 0.9);
    CHECK(rep.fine.estimate > 0.9);
    CHECK(std::isfinite(rep.fine.ci_high));
  }

  SUBCASE("p = -2 ordering holds within CI slack") {
    auto rep = gmc::kahane_negative_moment_check(spec, grid, 0.5, 0.02, 0.005,
                                                 -2.0, 4000, 62);
    CHECK(rep.ordering_holds);
  }

  SUBCASE("equal scales produce identical estimates") {
    auto rep = gmc::kahane_negative_moment_check(spec, GridSpec{1.0, 101}, 0.5,
                                                 0.02, 0.02, -1.0, 500, 63);
    CHECK(rep.coarse.estimate == rep.fine.estimate);
    CHECK(rep.ordering_holds);
  }

  SUBCASE("preconditions are enforced") {
    CHECK_THROWS_AS(gmc::kahane_negative_moment_check(spec, grid, 0.5, 0.005,
                                                      0.02, -1.0, 100, 1),
                    validation_error);
    CHECK_THROWS_AS(gmc::kahane_negative_moment_check(spec, grid, 0.5, 0.02,
                                                      0.005, 1.0, 100, 1),
                    validation_error);
  }
}

TEST_CASE("smeared measures converge along the coupled levels") {
  cov::CovarianceSpec spec;
  const std::size_t N = 301;
  const double pi = 3.14159265358979323846;

  std::vector<double> medians;
  for (double eps : {0.04, 0.02, 0.01}) {
    GridSpec grid{1.0, static_cast<std::size_t>(std::lround(4.0 / eps)) + 1};
    field::FieldSampler sampler(grid, {eps, 0.5 * eps}, spec);
    std::vector<double> d(N);
    for (std::size_t r = 0; r < N; ++r) {
      auto s = sampler.draw(71, r);
      auto coarse = gmc::gmc_from_field(s, 0, 0.5);
      auto fine = gmc::gmc_from_field(s, 1, 0.5);
      double acc = 0.0;
      for (std::size_t i = 0; i < grid.n_cells(); ++i) {
        double f = std::sin(pi * grid.node(i) / grid.T);
        acc += f * (coarse.cell_mass[i] - fine.cell_mass[i]);
      }
      d[r] = acc;
    }
    medians.push_back(median_abs(d));
  }
  CHECK(medians[0] > medians[1]);
  CHECK(medians[1] > medians[2]);
}

TEST_CASE("mollifier families agree at the finest level") {
  GridSpec grid{1.0, 401};
  const std::size_t N = 3000;
  std::vector<gmc::MomentReport> mean_reports, second_reports;
  for (auto family : {cov::Mollifier::bump_selfconvolution(),
                      cov::Mollifier::truncated_gaussian()}) {
    cov::CovarianceSpec spec;
    spec.mollifier = family;
    field::FieldSampler sampler(grid, {0.005}, spec);
    std::vector<gmc::GmcMeasure> ms;
    ms.reserve(N);
    for (std::size_t r = 0; r < N; ++r)
      ms.push_back(gmc::gmc_from_field(sampler.draw(81, r), 0, 0.5));
    mean_reports.push_back(gmc::total_mass_moment(ms, 1.0));
    second_reports.push_back(gmc::total_mass_moment(ms, 2.0));
  }
  // Combined-CI agreement: intervals for the two families overlap.
  CHECK(mean_reports[0].ci_low <= mean_reports[1].ci_high);
  CHECK(mean_reports[1].ci_low <= mean_reports[0].ci_high);
  CHECK(second_reports[0].ci_low <= second_reports[1].ci_high);
  CHECK(second_reports[1].ci_low <= second_reports[0].ci_high);
}
