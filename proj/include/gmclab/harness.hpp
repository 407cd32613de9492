#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gmclab/covkernel.hpp"
#include "gmclab/errors.hpp"
#include "gmclab/grid.hpp"
#include "gmclab/pressure1d.hpp"

namespace gmclab::harness {

enum class StudyKind { sample, gmc_stats, solve, wick, potential, project, converge, validate };

std::string to_string(StudyKind k);
StudyKind study_kind_from_string(const std::string& name);

std::string code_version();

// Complete description of one study.  The domain length T is stored once, on
// the grid; the covariance spec and the forcing inherit it.  Serialization is
// JSON with round-trip-exact doubles, so parse(serialize(c)) == c holds field
// for field.
struct ExperimentConfig {
  StudyKind kind = StudyKind::sample;
  cov::CovarianceSpec spec;  // spec.T kept equal to grid.T
  GridSpec grid{1.0, 201};
  double beta_prime = 0.0;  // 0 means "same as beta"
  std::vector<double> eps_schedule{0.02};
  pressure::ForcingSpec forcing = pressure::ForcingSpec::zero(1.0);
  pressure::BoundaryData bc;
  std::size_t replicates = 100;
  std::uint64_t seed = 1;
  std::size_t wick_cap = 8;
  std::string out_dir = "out";
  std::size_t workers = 1;

  double beta_prime_or_beta() const { return beta_prime > 0.0 ? beta_prime : spec.beta; }

  // Throws validation_error carrying every violated invariant at once.
  void validate() const;

  std::string serialize() const;
  static ExperimentConfig parse(const std::string& json_text);

  bool operator==(const ExperimentConfig& other) const;
};

struct RunManifest {
  std::string config_hash;  // FNV-1a of the exact config bytes
  std::string code_version;
  StudyKind kind = StudyKind::sample;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::vector<std::string> warnings;
  std::vector<std::string> artifacts;  // file names under out_dir, manifest excluded

  std::string to_json() const;
};

// Executes the study and writes its artifacts under config.out_dir, then
// manifest.json.  config_bytes feed the manifest hash, so a rerun of the same
// file is traceable to it.  Artifacts are numerically deterministic in
// (config, seed) and independent of the worker count; on failure every file
// written so far is removed before the exception propagates.
RunManifest run(const ExperimentConfig& config, const std::string& config_bytes);

// Summary of one metric stream.  The reduction is the canonical moment tree,
// so any worker partition of the index range aggregates to identical bytes.
struct McSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;
  double std_error = 0.0;
  double min = 0.0;
  double max = 0.0;
  double ci_low = 0.0;   // percentile bootstrap, 95%
  double ci_high = 0.0;

  std::string to_json() const;
};

McSummary mc_aggregate(std::span<const double> values, std::uint64_t bootstrap_seed);

struct KsReport {
  double statistic = 0.0;
  double critical = 0.0;  // two-sample threshold at the given level
  bool rejected = false;
};

KsReport ks_compare(std::span<const double> a, std::span<const double> b,
                    double significance = 0.01);

}  // namespace gmclab::harness
