#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "audit/estimation.hpp"
#include "audit/sample.hpp"

namespace audit::benchmark {

using estimation::FitResult;

/// Linear probability model of release on the group flag and control blocks.
struct BenchmarkSpec {
  std::string label;
  bool individual = false;
  bool judge_attorney = false;
  bool court_year_fe = false;
  /// The three time-varying court covariates (an alternative to the FE).
  bool court_year_covariates = false;
  /// Group x crime-category interactions replace the single group dummy.
  bool crime_interacted = false;
  estimation::OlsOptions ols;

  void validate() const;
};

/// Control sets of the five standard columns (1: none, 2: individual,
/// 3: judge/attorney, 4: court-by-year FE, 5: all three).
BenchmarkSpec standard_column(int column);

struct BenchmarkResult {
  std::string label;
  BenchmarkSpec spec;
  FitResult fit;
  double alpha_d = 0.0;
  double se = 0.0;
  double mean_dep = 0.0;
  double r_squared = 0.0;
  Index n_group1 = 0;
  Index n_group0 = 0;
};

/// Regressors (with intercept unless FE are absorbed) for a spec.
estimation::Design benchmark_design(const EstimationSample& sample, const BenchmarkSpec& spec);
FitResult fit_design(const EstimationSample& sample, const VectorXd& y, const estimation::Design& design,
                     bool court_year_fe, const estimation::OlsOptions& ols);

BenchmarkResult run_benchmark(const EstimationSample& sample, const BenchmarkSpec& spec);

struct CrimeCell {
  int category = 0;
  std::string name;
  bool present = false;
  bool identified = false;
  double coef = 0.0;
  double se = 0.0;
  Index n_group1 = 0;
  Index n_group0 = 0;
};

struct CrimeBenchmark {
  std::vector<CrimeCell> cells;
  FitResult fit;
  double mean_dep = 0.0;
  Index n_group1 = 0;
  Index n_group0 = 0;
};

/// Fully controlled fit with group x category interactions.
CrimeBenchmark run_benchmark_by_crime(const EstimationSample& sample, const estimation::OlsOptions& ols = {});

struct Partition {
  std::vector<std::string> labels;
  std::vector<std::vector<Index>> cells;
};

/// Binary moderator interacted with the group flag.  With split_group the
/// group dummy is replaced by group x (1 - z) and group x z.
struct Interaction {
  std::string name;
  VectorXd indicator;  ///< aligned with the full sample
  bool split_group = false;
};

struct SplitCell {
  std::string label;
  BenchmarkResult result;
  /// Interaction terms: name -> (coefficient, SE); absent when not identified.
  std::map<std::string, std::pair<double, double>> terms;
  std::map<std::string, Index> term_counts;
};

/// One fit per partition cell, each optionally with an interaction.
std::vector<SplitCell> run_benchmark_split(const EstimationSample& sample, const Partition& partition,
                                           const BenchmarkSpec& spec,
                                           const std::optional<Interaction>& interaction = std::nullopt);

Partition partition_by_previous_prosecution(const EstimationSample& sample);
/// Cases up to and including `last_year_first_period` versus later cases.
Partition partition_by_period(const EstimationSample& sample, int last_year_first_period = 2012);
/// Judges with at least `min_cases` cases in the first period.
Interaction experienced_judge_interaction(const EstimationSample& sample, int last_year_first_period = 2012,
                                          int min_cases = 200);
Interaction origin_interaction(const EstimationSample& sample);

}  // namespace audit::benchmark
