#include "gmclab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "gmclab/acceptance.hpp"
#include "gmclab/fieldsim.hpp"
#include "gmclab/gmc.hpp"
#include "gmclab/hashing.hpp"
#include "gmclab/potential.hpp"
#include "gmclab/projection.hpp"
#include "gmclab/rng.hpp"
#include "gmclab/stats.hpp"
#include "gmclab/textio.hpp"

namespace gmclab::harness {

namespace fs = std::filesystem;
using nlohmann::json;

std::string code_version() { return "gmclab 0.1.0"; }

std::string to_string(StudyKind k) {
  switch (k) {
    case StudyKind::sample: return "sample";
    case StudyKind::gmc_stats: return "gmc-stats";
    case StudyKind::solve: return "solve";
    case StudyKind::wick: return "wick";
    case StudyKind::potential: return "potential";
    case StudyKind::project: return "project";
    case StudyKind::converge: return "converge";
    case StudyKind::validate: return "validate";
  }
  throw validation_error("config: unknown study kind value");
}

StudyKind study_kind_from_string(const std::string& name) {
  if (name == "sample") return StudyKind::sample;
  if (name == "gmc-stats") return StudyKind::gmc_stats;
  if (name == "solve") return StudyKind::solve;
  if (name == "wick") return StudyKind::wick;
  if (name == "potential") return StudyKind::potential;
  if (name == "project") return StudyKind::project;
  if (name == "converge") return StudyKind::converge;
  if (name == "validate") return StudyKind::validate;
  throw validation_error("config: unknown study kind \"" + name + "\"");
}

namespace {

std::string bc_name(pressure::BcKind k) {
  switch (k) {
    case pressure::BcKind::ivp: return "ivp";
    case pressure::BcKind::dirichlet: return "dirichlet";
    case pressure::BcKind::neumann: return "neumann";
    case pressure::BcKind::periodic: return "periodic";
  }
  throw validation_error("config: unknown bc kind value");
}

pressure::BcKind bc_from_name(const std::string& name) {
  if (name == "ivp") return pressure::BcKind::ivp;
  if (name == "dirichlet") return pressure::BcKind::dirichlet;
  if (name == "neumann") return pressure::BcKind::neumann;
  if (name == "periodic") return pressure::BcKind::periodic;
  throw validation_error("config: unknown bc kind \"" + name + "\"");
}

std::string forcing_family_name(pressure::ForcingSpec::Family f) {
  switch (f) {
    case pressure::ForcingSpec::Family::zero: return "zero";
    case pressure::ForcingSpec::Family::constant: return "constant";
    case pressure::ForcingSpec::Family::sine: return "sine";
    case pressure::ForcingSpec::Family::piecewise: return "piecewise";
  }
  throw validation_error("config: unknown forcing family value");
}

json forcing_to_json(const pressure::ForcingSpec& f) {
  json j;
  j["family"] = forcing_family_name(f.family);
  switch (f.family) {
    case pressure::ForcingSpec::Family::zero:
      break;
    case pressure::ForcingSpec::Family::constant:
      j["amplitude"] = f.amplitude;
      break;
    case pressure::ForcingSpec::Family::sine:
      j["amplitude"] = f.amplitude;
      j["cycles"] = f.cycles;
      j["phase"] = f.phase;
      break;
    case pressure::ForcingSpec::Family::piecewise:
      j["breaks"] = f.breaks;
      j["pieces"] = f.pieces;
      break;
  }
  return j;
}

json summary_to_json(const McSummary& s) {
  json j;
  j["n"] = s.n;
  j["mean"] = s.mean;
  j["variance"] = s.variance;
  j["std_error"] = s.std_error;
  j["min"] = s.min;
  j["max"] = s.max;
  j["ci_low"] = s.ci_low;
  j["ci_high"] = s.ci_high;
  return j;
}

// Runs fn(r) for r in [0, n) on `workers` strided threads.  Callers write
// results into disjoint per-replicate slots, so the output is independent of
// the partition; the first exception wins and the rest of the work finishes.
template <typename Fn>
void for_each_replicate(std::size_t n, std::size_t workers, Fn fn) {
  std::size_t k = std::min(std::max<std::size_t>(workers, 1), std::max<std::size_t>(n, 1));
  if (k <= 1) {
    for (std::size_t r = 0; r < n; ++r) fn(r);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr first;
  std::mutex mu;
  for (std::size_t w = 0; w < k; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t r = w; r < n; r += k) fn(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

// Collects artifact files so a failed run can undo everything it wrote.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& content) {
    fs::path p = dir_ / name;
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    os.flush();
    if (!os) throw io_error("cannot write artifact " + p.string());
    names_.push_back(name);
  }

  const std::vector<std::string>& names() const { return names_; }

  void remove_all() {
    for (const auto& n : names_) {
      std::error_code ec;
      fs::remove(dir_ / n, ec);
    }
    names_.clear();
  }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

std::uint64_t metric_seed(const ExperimentConfig& c, std::uint64_t slot) {
  return rng::derive_seed(c.seed, 0x4D43ull * 1000 + slot);
}

void run_sample(const ExperimentConfig& c, ArtifactWriter& w,
                std::vector<std::string>& warnings) {
  field::FieldSampler sampler(c.grid, c.eps_schedule, c.spec);
  if (sampler.jitter_used() > 0.0)
    warnings.push_back("jitter " + g17(sampler.jitter_used()));

  std::vector<field::FieldSample> batch;
  for (std::size_t r = 0; r < std::min<std::size_t>(3, c.replicates); ++r)
    batch.push_back(sampler.draw(c.seed, r));
  std::ostringstream csv;
  field::write_fields_csv(csv, batch);
  w.write("fields.csv", csv.str());

  const std::size_t levels = c.eps_schedule.size();
  const std::size_t mid = c.grid.n_points / 2;
  std::vector<std::vector<double>> mid_value(levels, std::vector<double>(c.replicates));
  for_each_replicate(c.replicates, c.workers, [&](std::size_t r) {
    field::FieldSample s = sampler.draw(c.seed, r);
    for (std::size_t l = 0; l < levels; ++l) mid_value[l][r] = s.values[l][mid];
  });

  json out;
  out["beta"] = c.spec.beta;
  out["replicates"] = c.replicates;
  out["seed"] = c.seed;
  out["mid_node"] = mid;
  json arr = json::array();
  for (std::size_t l = 0; l < levels; ++l) {
    json lv;
    lv["eps"] = c.eps_schedule[l];
    lv["sigma2"] = sampler.sigma2()[l];
    lv["mid_value"] = summary_to_json(mc_aggregate(mid_value[l], metric_seed(c, l)));
    arr.push_back(lv);
  }
  out["levels"] = arr;
  w.write("field_stats.json", out.dump(2) + "\n");
}

void run_gmc_stats(const ExperimentConfig& c, ArtifactWriter& w,
                   std::vector<std::string>& warnings) {
  field::FieldSampler sampler(c.grid, c.eps_schedule, c.spec);
  if (sampler.jitter_used() > 0.0)
    warnings.push_back("jitter " + g17(sampler.jitter_used()));

  const std::size_t levels = c.eps_schedule.size();
  std::vector<std::vector<double>> mass(levels, std::vector<double>(c.replicates));
  std::vector<std::vector<double>> mass_sq(levels, std::vector<double>(c.replicates));
  std::vector<std::vector<double>> mass_inv(levels, std::vector<double>(c.replicates));
  for_each_replicate(c.replicates, c.workers, [&](std::size_t r) {
    field::FieldSample s = sampler.draw(c.seed, r);
    for (std::size_t l = 0; l < levels; ++l) {
      double m = gmc::gmc_from_field(s, l, c.spec.beta).total();
      mass[l][r] = m;
      mass_sq[l][r] = m * m;
      mass_inv[l][r] = 1.0 / m;
    }
  });

  json out;
  out["beta"] = c.spec.beta;
  out["replicates"] = c.replicates;
  out["seed"] = c.seed;
  json arr = json::array();
  for (std::size_t l = 0; l < levels; ++l) {
    json lv;
    lv["eps"] = c.eps_schedule[l];
    lv["sigma2"] = sampler.sigma2()[l];
    lv["total_mass"] = summary_to_json(mc_aggregate(mass[l], metric_seed(c, 3 * l)));
    lv["second_moment"] =
        summary_to_json(mc_aggregate(mass_sq[l], metric_seed(c, 3 * l + 1)));
    lv["inverse_mass"] =
        summary_to_json(mc_aggregate(mass_inv[l], metric_seed(c, 3 * l + 2)));
    arr.push_back(lv);
  }
  out["levels"] = arr;
  w.write("gmc_stats.json", out.dump(2) + "\n");
}

void run_solve(const ExperimentConfig& c, ArtifactWriter& w,
               std::vector<std::string>& warnings) {
  field::FieldSampler sampler(c.grid, c.eps_schedule, c.spec);
  if (sampler.jitter_used() > 0.0)
    warnings.push_back("jitter " + g17(sampler.jitter_used()));

  const std::size_t levels = c.eps_schedule.size();
  const std::size_t last = levels - 1;
  const std::size_t mid = c.grid.n_points / 2;
  std::vector<std::vector<double>> u_mid(levels, std::vector<double>(c.replicates));
  std::vector<std::vector<double>> kappa(levels, std::vector<double>(c.replicates));
  for_each_replicate(c.replicates, c.workers, [&](std::size_t r) {
    field::FieldSample s = sampler.draw(c.seed, r);
    for (std::size_t l = 0; l < levels; ++l) {
      pressure::SolutionPath u =
          pressure::solve_pathwise(gmc::gmc_from_field(s, l, c.spec.beta), c.forcing, c.bc);
      u_mid[l][r] = u.values[mid];
      kappa[l][r] = u.kappa;
    }
  });

  field::FieldSample first = sampler.draw(c.seed, 0);
  pressure::SolutionPath u0 = pressure::solve_pathwise(
      gmc::gmc_from_field(first, last, c.spec.beta), c.forcing, c.bc);
  std::ostringstream csv;
  pressure::write_solution_csv(csv, u0);
  w.write("solution.csv", csv.str());
  pressure::ResidualReport res = pressure::verify_pathwise_ode(u0, first, last, c.forcing);

  json out;
  out["beta"] = c.spec.beta;
  out["bc"] = bc_name(c.bc.kind);
  out["replicates"] = c.replicates;
  out["seed"] = c.seed;
  out["mid_node"] = mid;
  json arr = json::array();
  for (std::size_t l = 0; l < levels; ++l) {
    json lv;
    lv["eps"] = c.eps_schedule[l];
    lv["u_mid"] = summary_to_json(mc_aggregate(u_mid[l], metric_seed(c, 2 * l)));
    lv["kappa"] = summary_to_json(mc_aggregate(kappa[l], metric_seed(c, 2 * l + 1)));
    arr.push_back(lv);
  }
  out["levels"] = arr;
  out["first_replicate_residual"] = {
      {"max_abs", res.max_abs}, {"rms", res.rms}, {"n_interior", res.n_interior}};
  w.write("solve_stats.json", out.dump(2) + "\n");
}

void run_wick(const ExperimentConfig& c, ArtifactWriter& w,
              std::vector<std::string>& warnings) {
  pressure::ChaosField cf =
      pressure::chaos_field_from_covariance(c.grid, c.spec, c.eps_schedule.front(), 0);
  if (cf.discarded_variance > 0.0)
    warnings.push_back("truncation_loss " + g17(cf.discarded_variance));
  pressure::ChaosSolution ws = pressure::solve_wick_chaos(cf, c.forcing, c.bc, c.wick_cap);

  std::ostringstream os;
  pressure::write_chaos_solution_json(os, ws);
  w.write("wick_solution.json", os.str());

  json rep;
  rep["eps"] = c.eps_schedule.front();
  rep["beta"] = c.spec.beta;
  rep["cap"] = c.wick_cap;
  rep["n_vars"] = cf.n_vars;
  rep["discarded_variance"] = cf.discarded_variance;
  rep["kappa_mean"] = ws.kappa.coeff(chaos::MultiIndex{});
  std::vector<double> means;
  means.reserve(ws.values.size());
  for (const auto& v : ws.values) means.push_back(v.coeff(chaos::MultiIndex{}));
  rep["u_mean"] = means;
  w.write("wick_report.json", rep.dump(2) + "\n");
}

void run_potential(const ExperimentConfig& c, ArtifactWriter& w,
                   std::vector<std::string>& warnings) {
  double alpha = c.spec.beta * c.beta_prime_or_beta();
  potential::PotentialOperator op = potential::build_G(alpha, c.grid, c.spec);
  warnings.push_back("condition " + g17(op.condition_estimate));

  std::ostringstream os;
  potential::write_potential_operator(os, op, c.spec);
  w.write("potential_operator.txt", os.str());

  potential::C0Report c0 = potential::nondegeneracy_check(c.spec, c.spec.beta, c.grid);
  if (c0.violated) warnings.push_back("nondegeneracy violated");
  json rep;
  rep["alpha"] = alpha;
  rep["beta"] = c.spec.beta;
  rep["c0"] = c0.c0;
  rep["violated"] = c0.violated;
  rep["quotient_at_witness"] = c0.quotient_at_witness;
  rep["condition_estimate"] = op.condition_estimate;
  rep["min_eigenvalue"] = op.min_eigenvalue;
  w.write("nondegeneracy.json", rep.dump(2) + "\n");
}

void run_project(const ExperimentConfig& c, ArtifactWriter& w,
                 std::vector<std::string>& warnings) {
  projection::ProjectedSolution sol = projection::solve_projected_bvp(
      c.spec.beta, c.beta_prime_or_beta(), c.spec, c.forcing, c.bc, c.grid, c.grid);
  projection::RecoveryReport rec = projection::recover_kernel(sol, c.spec);
  if (rec.regularized) warnings.push_back("kernel recovery regularized");
  warnings.push_back("recovery condition " + g17(rec.condition_estimate));

  std::ostringstream ucsv;
  projection::write_u_tilde_csv(ucsv, sol);
  w.write("u_tilde.csv", ucsv.str());
  std::ostringstream pcsv;
  projection::write_phi_csv(pcsv, sol);
  w.write("phi_kernel.csv", pcsv.str());

  projection::McCheckReport mc =
      projection::projected_mc_check(sol, c.spec, c.replicates, c.eps_schedule.front(), c.seed);
  json rep = json::parse(projection::manifest_json(sol));
  rep["recovery"] = {{"max_residual", rec.max_residual},
                     {"condition_estimate", rec.condition_estimate},
                     {"regularized", rec.regularized}};
  rep["mc_check"] = json::parse(mc.to_json());
  w.write("projection_report.json", rep.dump(2) + "\n");
}

void run_converge(const ExperimentConfig& c, ArtifactWriter& w,
                  std::vector<std::string>& warnings) {
  pressure::ConvergenceReport rep = pressure::convergence_study(
      c.spec, c.grid, c.eps_schedule, c.forcing, c.bc, c.replicates, c.seed);
  if (!rep.monotone) warnings.push_back("ky fan distances not monotone");
  w.write("convergence.json", rep.to_json() + "\n");
}

void run_validate(const ExperimentConfig&, ArtifactWriter& w,
                  std::vector<std::string>& warnings) {
  std::ostringstream lines;
  std::vector<acceptance::CriterionResult> results = acceptance::run_suite(lines);
  w.write("acceptance.txt", lines.str());
  json arr = json::array();
  std::size_t failed = 0;
  for (const auto& r : results) {
    arr.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
    if (!r.passed) ++failed;
  }
  w.write("acceptance.json", arr.dump(2) + "\n");
  if (failed) warnings.push_back(std::to_string(failed) + " acceptance criteria failed");
}

}  // namespace

void ExperimentConfig::validate() const {
  std::vector<std::string> bad;
  auto absorb = [&](auto&& fn) {
    try {
      fn();
    } catch (const validation_error& e) {
      for (const auto& v : e.violations()) bad.push_back(v);
    }
  };
  absorb([&] { grid.validate(); });
  absorb([&] { spec.validate(); });
  absorb([&] { forcing.validate(); });

  if (spec.T != grid.T) bad.push_back("config: covariance T differs from grid T");
  if (forcing.T != grid.T) bad.push_back("config: forcing T differs from grid T");

  if (eps_schedule.empty()) bad.push_back("config: eps schedule is empty");
  const double delta = grid.n_points >= 2 ? grid.delta() : 0.0;
  for (double e : eps_schedule) {
    if (!(e > 0.0) || !std::isfinite(e)) {
      bad.push_back("config: eps must be positive and finite");
      continue;
    }
    if (grid.n_points >= 2 && e < 2.0 * delta * (1.0 - 4e-16))
      bad.push_back("config: eps " + g17(e) + " resolves below the grid, need eps >= 2 delta = " +
                    g17(2.0 * delta));
  }
  if (kind == StudyKind::converge) {
    if (eps_schedule.size() < 2)
      bad.push_back("config: converge needs at least two eps levels");
    for (std::size_t i = 0; i + 1 < eps_schedule.size(); ++i)
      if (!(eps_schedule[i] > eps_schedule[i + 1])) {
        bad.push_back("config: converge needs a strictly decreasing eps schedule");
        break;
      }
  }

  if (!std::isfinite(bc.u1) || !std::isfinite(bc.u2))
    bad.push_back("config: boundary data must be finite");
  if (bc.kind == pressure::BcKind::periodic && std::fabs(forcing.integral()) > 1e-12)
    bad.push_back("config: periodic run needs mean-zero forcing, int f = " +
                  g17(forcing.integral()));
  if (bc.kind == pressure::BcKind::neumann &&
      std::fabs(bc.u2 - bc.u1 - forcing.F(grid.T)) > 1e-12)
    bad.push_back("config: neumann data incompatible with the forcing, u2 - u1 - F(T) = " +
                  g17(bc.u2 - bc.u1 - forcing.F(grid.T)));

  if (replicates == 0) bad.push_back("config: replicates must be positive");
  if (workers == 0) bad.push_back("config: workers must be positive");
  if (wick_cap < 1 || wick_cap > 40) bad.push_back("config: wick cap must lie in [1, 40]");
  if (out_dir.empty()) bad.push_back("config: out dir is empty");
  if (beta_prime != 0.0) {
    if (!(beta_prime > 0.0 && beta_prime < 1.0))
      bad.push_back("config: beta' must lie in (0, 1)");
    else if (beta_prime < spec.beta)
      bad.push_back("config: beta' must be >= beta");
  }

  if (!bad.empty()) throw validation_error(bad);
}

std::string ExperimentConfig::serialize() const {
  json j;
  j["kind"] = to_string(kind);
  j["beta"] = spec.beta;
  j["beta_prime"] = beta_prime;
  j["grid"] = {{"T", grid.T}, {"n_points", grid.n_points}};
  json m;
  m["family"] = spec.mollifier.family() == cov::MollifierFamily::BumpSelfConvolution
                    ? "bump"
                    : "gaussian";
  if (spec.mollifier.family() == cov::MollifierFamily::TruncatedGaussian)
    m["sigma"] = spec.mollifier.sigma();
  j["mollifier"] = m;
  if (spec.h.is_zero())
    j["h"] = "zero";
  else
    j["h"] = {{"radius", spec.h.radius()}, {"values", spec.h.values()}};
  j["eps"] = eps_schedule;
  j["forcing"] = forcing_to_json(forcing);
  j["bc"] = {{"kind", bc_name(bc.kind)}, {"u1", bc.u1}, {"u2", bc.u2}};
  j["replicates"] = replicates;
  j["seed"] = seed;
  j["wick_cap"] = wick_cap;
  j["out_dir"] = out_dir;
  j["workers"] = workers;
  return j.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::parse(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw validation_error(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw validation_error("config: top level must be a JSON object");

  static const std::set<std::string> known = {
      "kind",  "beta", "beta_prime", "grid",    "mollifier", "h",       "eps",
      "forcing", "bc", "replicates", "seed",    "wick_cap",  "out_dir", "workers"};
  std::vector<std::string> bad;
  for (const auto& item : j.items())
    if (!known.count(item.key())) bad.push_back("config: unknown key \"" + item.key() + "\"");

  ExperimentConfig c;
  auto read = [&](const char* key, auto&& fn) {
    if (!j.contains(key)) return;
    try {
      fn(j.at(key));
    } catch (const validation_error& e) {
      for (const auto& v : e.violations()) bad.push_back(v);
    } catch (const json::exception& e) {
      bad.push_back(std::string("config: bad \"") + key + "\": " + e.what());
    }
  };

  if (!j.contains("kind")) bad.push_back("config: missing required key \"kind\"");
  read("kind", [&](const json& v) { c.kind = study_kind_from_string(v.get<std::string>()); });
  read("grid", [&](const json& v) {
    c.grid.T = v.at("T").get<double>();
    c.grid.n_points = v.at("n_points").get<std::size_t>();
  });
  c.spec.T = c.grid.T;
  c.forcing = pressure::ForcingSpec::zero(c.grid.T);
  read("beta", [&](const json& v) { c.spec.beta = v.get<double>(); });
  read("beta_prime", [&](const json& v) { c.beta_prime = v.get<double>(); });
  read("mollifier", [&](const json& v) {
    std::string family = v.at("family").get<std::string>();
    if (family == "bump") {
      if (v.contains("sigma"))
        bad.push_back("config: mollifier sigma only applies to the gaussian family");
      c.spec.mollifier = cov::Mollifier::bump_selfconvolution();
    } else if (family == "gaussian") {
      c.spec.mollifier = cov::Mollifier::truncated_gaussian(
          v.contains("sigma") ? v.at("sigma").get<double>() : 0.2);
    } else {
      bad.push_back("config: unknown mollifier family \"" + family + "\"");
    }
  });
  read("h", [&](const json& v) {
    if (v.is_string()) {
      if (v.get<std::string>() != "zero")
        bad.push_back("config: h must be \"zero\" or a radius/values table");
      return;
    }
    c.spec.h = cov::HTable::from_table(v.at("radius").get<double>(),
                                       v.at("values").get<std::vector<double>>());
  });
  read("eps", [&](const json& v) { c.eps_schedule = v.get<std::vector<double>>(); });
  read("forcing", [&](const json& v) {
    std::string family = v.at("family").get<std::string>();
    if (family == "zero") {
      c.forcing = pressure::ForcingSpec::zero(c.grid.T);
    } else if (family == "constant") {
      c.forcing = pressure::ForcingSpec::constant(v.at("amplitude").get<double>(), c.grid.T);
    } else if (family == "sine") {
      c.forcing = pressure::ForcingSpec::sine(
          v.at("amplitude").get<double>(), v.at("cycles").get<int>(), c.grid.T,
          v.contains("phase") ? v.at("phase").get<double>() : 0.0);
    } else if (family == "piecewise") {
      c.forcing = pressure::ForcingSpec::piecewise(
          v.at("breaks").get<std::vector<double>>(), v.at("pieces").get<std::vector<double>>());
    } else {
      bad.push_back("config: unknown forcing family \"" + family + "\"");
    }
  });
  read("bc", [&](const json& v) {
    c.bc.kind = bc_from_name(v.at("kind").get<std::string>());
    c.bc.u1 = v.contains("u1") ? v.at("u1").get<double>() : 0.0;
    c.bc.u2 = v.contains("u2") ? v.at("u2").get<double>() : 0.0;
  });
  read("replicates", [&](const json& v) { c.replicates = v.get<std::size_t>(); });
  read("seed", [&](const json& v) { c.seed = v.get<std::uint64_t>(); });
  read("wick_cap", [&](const json& v) { c.wick_cap = v.get<std::size_t>(); });
  read("out_dir", [&](const json& v) { c.out_dir = v.get<std::string>(); });
  read("workers", [&](const json& v) { c.workers = v.get<std::size_t>(); });

  if (!bad.empty()) throw validation_error(bad);
  return c;
}

bool ExperimentConfig::operator==(const ExperimentConfig& other) const {
  const auto& a = *this;
  const auto& b = other;
  if (a.kind != b.kind || a.spec.T != b.spec.T || a.spec.beta != b.spec.beta) return false;
  if (a.spec.mollifier.family() != b.spec.mollifier.family()) return false;
  if (a.spec.mollifier.sigma() != b.spec.mollifier.sigma()) return false;
  if (a.spec.h.is_zero() != b.spec.h.is_zero()) return false;
  if (!a.spec.h.is_zero() &&
      (a.spec.h.radius() != b.spec.h.radius() || a.spec.h.values() != b.spec.h.values()))
    return false;
  if (a.grid.T != b.grid.T || a.grid.n_points != b.grid.n_points) return false;
  if (a.beta_prime != b.beta_prime || a.eps_schedule != b.eps_schedule) return false;
  const auto& f = a.forcing;
  const auto& g = b.forcing;
  if (f.family != g.family || f.T != g.T || f.amplitude != g.amplitude ||
      f.cycles != g.cycles || f.phase != g.phase || f.breaks != g.breaks ||
      f.pieces != g.pieces)
    return false;
  if (a.bc.kind != b.bc.kind || a.bc.u1 != b.bc.u1 || a.bc.u2 != b.bc.u2) return false;
  return a.replicates == b.replicates && a.seed == b.seed && a.wick_cap == b.wick_cap &&
         a.out_dir == b.out_dir && a.workers == b.workers;
}

std::string RunManifest::to_json() const {
  json j;
  j["config_hash"] = config_hash;
  j["code_version"] = code_version;
  j["kind"] = to_string(kind);
  j["seed"] = seed;
  j["wall_seconds"] = wall_seconds;
  j["warnings"] = warnings;
  j["artifacts"] = artifacts;
  return j.dump(2) + "\n";
}

RunManifest run(const ExperimentConfig& config, const std::string& config_bytes) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();

  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw io_error("cannot create out dir " + config.out_dir + ": " + ec.message());

  RunManifest man;
  man.config_hash = hashing::fnv1a_hex(config_bytes);
  man.code_version = harness::code_version();
  man.kind = config.kind;
  man.seed = config.seed;

  ArtifactWriter writer{fs::path(config.out_dir)};
  try {
    switch (config.kind) {
      case StudyKind::sample: run_sample(config, writer, man.warnings); break;
      case StudyKind::gmc_stats: run_gmc_stats(config, writer, man.warnings); break;
      case StudyKind::solve: run_solve(config, writer, man.warnings); break;
      case StudyKind::wick: run_wick(config, writer, man.warnings); break;
      case StudyKind::potential: run_potential(config, writer, man.warnings); break;
      case StudyKind::project: run_project(config, writer, man.warnings); break;
      case StudyKind::converge: run_converge(config, writer, man.warnings); break;
      case StudyKind::validate: run_validate(config, writer, man.warnings); break;
    }
  } catch (...) {
    writer.remove_all();
    throw;
  }

  man.artifacts = writer.names();
  man.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  fs::path mpath = fs::path(config.out_dir) / "manifest.json";
  std::ofstream os(mpath, std::ios::binary | std::ios::trunc);
  std::string text = man.to_json();
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  os.flush();
  if (!os) {
    writer.remove_all();
    throw io_error("cannot write manifest " + mpath.string());
  }
  return man;
}

std::string McSummary::to_json() const { return summary_to_json(*this).dump(2) + "\n"; }

McSummary mc_aggregate(std::span<const double> values, std::uint64_t bootstrap_seed) {
  if (values.empty()) throw validation_error("mc_aggregate: empty stream");
  stats::Moments m = stats::reduce_moments(values);
  McSummary s;
  s.n = m.n;
  s.mean = m.mean();
  s.variance = m.variance();
  s.std_error = m.std_error();
  s.min = m.min;
  s.max = m.max;
  if (values.size() >= 2) {
    stats::Interval ci = stats::bootstrap_mean_ci(values, bootstrap_seed);
    s.ci_low = ci.lo;
    s.ci_high = ci.hi;
  } else {
    s.ci_low = s.ci_high = s.mean;
  }
  return s;
}

KsReport ks_compare(std::span<const double> a, std::span<const double> b,
                    double significance) {
  if (a.empty() || b.empty()) throw validation_error("ks_compare: empty stream");
  if (!(significance > 0.0 && significance < 1.0))
    throw validation_error("ks_compare: significance must lie in (0, 1)");
  KsReport r;
  r.statistic = stats::ks_statistic(std::vector<double>(a.begin(), a.end()),
                                    std::vector<double>(b.begin(), b.end()));
  r.critical = stats::ks_critical(significance, a.size(), b.size());
  r.rejected = r.statistic > r.critical;
  return r;
}

}  // namespace gmclab::harness
