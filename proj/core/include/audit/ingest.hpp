#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "audit/records.hpp"
#include "audit/sample.hpp"

namespace audit::ingest {

struct RestrictionRules {
  bool drop_inconsistent_dates = true;
  bool drop_overlong_detention = true;
  bool exclude_summons = true;
  bool exclude_juvenile = true;
  bool exclude_private_attorney = true;
  /// Cases lasting longer than this are dropped; 0 disables the rule.
  int max_case_length_days = 730;
  bool deduplicate_crimes = true;
  double min_crime_detention_rate = 0.05;
  int min_judge_cases = 10;
  int min_attorney_prior_cases = 10;
  /// Earlier cases are invisible to the criminal-record features.
  std::optional<Date> history_start_date;
};

struct LedgerEntry {
  std::string rule;
  std::size_t excluded = 0;
  std::size_t remaining = 0;
};

struct ExclusionLedger {
  std::size_t input_rows = 0;
  std::size_t output_rows = 0;
  std::vector<LedgerEntry> entries;
  std::vector<std::string> notes;

  std::size_t total_excluded() const;
  std::size_t excluded_by(const std::string& rule) const;
  std::string render() const;
};

/// Rule labels in application order.
extern const std::vector<std::string> kRuleNames;

/// Share of detained cases per crime type.
using SeverityMap = std::map<std::string, double>;
/// Throws DataError for a crime type that has no cases.
double severity_of(const SeverityMap& map, const std::string& crime_type);

SeverityMap compute_severity(std::span<const CaseRecord> records);

struct HistoryFeatures {
  int prev_case = 0;
  int n_previous = 0;
  int prev_misconduct = 0;
  int prev_conviction = 0;
  double severity_last = 0.0;
};

/// Criminal-record features of each record, built only from the same
/// defendant's strictly earlier cases.  A past released case counts as prior
/// misconduct when it recorded nonappearance or recidivism and ended before
/// the current hearing, or when the defendant was arrested again after its
/// start and no later than both its end and the current hearing.  Records
/// must be one row per (defendant, case); duplicates raise DataError.
std::vector<HistoryFeatures> compute_history(std::span<const CaseRecord> records, const SeverityMap& severity,
                                             std::optional<Date> history_start = std::nullopt);

/// Mean of `values` over the other rows sharing the row's key.  Throws
/// DataError naming the key when it has a single row, unless
/// `singleton_value` is given.
VectorXd leave_out_means(const VectorXd& values, std::span<const int> keys,
                         std::optional<double> singleton_value = std::nullopt, std::size_t* singletons = nullptr);

struct LeaveOutMeasures {
  VectorXd judge_leniency;
  VectorXd attorney_quality;
  std::size_t attorney_singletons = 0;
};

/// Release residualized on court-by-year effects, then leave-out means by
/// judge and by attorney.  The court-by-year means used for case i exclude
/// case i as well, so no case's own release enters its own regressor.
/// Attorneys seen once in the sample get 0.
LeaveOutMeasures compute_leaveout_measures(const EstimationSample& sample);

struct BuildResult {
  EstimationSample sample;
  ExclusionLedger ledger;
  SeverityMap severity;
};

BuildResult build_sample(std::span<const CaseRecord> records, const RestrictionRules& rules = {});

struct DescriptiveRow {
  std::string label;
  double group0 = 0.0;
  double group1 = 0.0;
  bool count = false;
  bool heading = false;
};

struct DescriptiveTable {
  std::vector<DescriptiveRow> rows;
  const DescriptiveRow& row(const std::string& label) const;
};

DescriptiveTable describe_sample(const EstimationSample& sample);

}  // namespace audit::ingest
