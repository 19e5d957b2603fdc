#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "audit/estimation.hpp"

namespace audit {

using Eigen::Index;
using Eigen::VectorXd;

/// Rectangular analysis dataset, one row per retained prosecution.
///
/// Misconduct columns hold NaN on detained rows.  Optional partition columns
/// (male, income_proxy, origin_new) hold NaN where the source lacked them.
struct EstimationSample {
  VectorXd release;
  VectorXd misconduct;
  VectorXd nonappearance;
  VectorXd recidivism;
  VectorXd group;

  VectorXd prev_case;
  VectorXd n_previous;
  VectorXd prev_misconduct;
  VectorXd prev_conviction;
  VectorXd severity_last;
  VectorXd severity_current;
  std::vector<int> crime_category;  ///< 1..9

  VectorXd judge_leniency;
  VectorXd judge_leniency_sq;
  VectorXd attorney_quality;
  VectorXd attorney_quality_sq;

  /// Court-by-year key; doubles as the cluster key.
  std::vector<int> court_year;
  VectorXd cy_n_judges;
  VectorXd cy_release_rate;
  VectorXd cy_n_cases;
  VectorXd cy_avg_severity;

  std::vector<int> judge;
  std::vector<int> attorney;
  std::vector<int> court;
  std::vector<int> year;
  std::vector<std::string> case_id;

  VectorXd male;
  VectorXd income_proxy;
  VectorXd origin_new;

  Index rows() const noexcept { return release.size(); }
  EstimationSample subset(std::span<const Index> rows) const;
  std::vector<Index> released_rows() const;
  std::vector<Index> all_rows() const;

  /// Column by canonical name: group, release, misconduct, prev_case,
  /// n_previous, prev_misconduct, prev_conviction, severity_last,
  /// severity_current, cat_1..cat_9, judge_leniency(_sq),
  /// attorney_quality(_sq), cy_n_judges, cy_release_rate, cy_n_cases,
  /// cy_avg_severity, male, income_proxy, origin_new, year.
  VectorXd column(std::string_view name) const;
  bool has_column_data(std::string_view name) const;

  /// Throws DataError when a structural invariant is broken.
  void validate() const;
};

inline constexpr int kBaseCrimeCategory = 9;

/// Individual controls in canonical order.  Category dummies exclude the base
/// category so the design stays full rank next to an intercept or absorbed
/// fixed effects.
std::vector<std::string> individual_control_names(bool with_categories = true);
std::vector<std::string> judge_attorney_names();
std::vector<std::string> court_year_covariate_names();

/// Design with an optional intercept followed by the named sample columns.
estimation::Design make_design(const EstimationSample& sample, std::span<const std::string> columns,
                               bool intercept);

/// Columnar CSV with a header row; NaN written as an empty field.
void write_sample_csv(std::ostream& out, const EstimationSample& sample);
void write_sample_csv(const std::filesystem::path& path, const EstimationSample& sample);

}  // namespace audit
