#pragma once

// Run configuration: an INI file with sections, parsed strictly (unknown
// sections or keys are errors).  Overrides given as "section.key=value"
// take precedence over the file.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "audit/ingest.hpp"
#include "audit/oster.hpp"
#include "audit/outcome_test.hpp"
#include "audit/selection.hpp"
#include "audit/synthdgp.hpp"

namespace audit {

/// Analyses in execution order.
inline const std::vector<std::string> kAnalysisNames{"simulate", "describe", "benchmark", "oster",
                                                     "selection", "kob",      "pbot"};

struct AuditConfig {
  std::string input_path;
  std::filesystem::path output_dir = "audit_out";
  std::vector<std::string> analyses;
  std::vector<std::string> group_labels{"Group 0", "Group 1"};
  std::uint64_t seed = 20240101;
  unsigned threads = 1;

  ingest::RestrictionRules rules;

  std::vector<int> benchmark_columns{1, 2, 3, 4, 5};
  bool small_sample_correction = true;
  estimation::CollinearPolicy collinear = estimation::CollinearPolicy::Drop;
  bool benchmark_by_crime = true;
  bool benchmark_heterogeneity = true;
  int first_period_last_year = 2012;
  int experienced_judge_min_cases = 200;

  std::vector<double> oster_deltas = oster::default_deltas();
  std::vector<double> oster_rmaxes = oster::default_rmaxes();
  oster::OsterMode oster_mode = oster::OsterMode::Restricted;
  int oster_uncontrolled_column = 1;
  int oster_controlled_column = 5;

  std::vector<selection::SelectionModel> selection_models{
      selection::SelectionModel::Heckit, selection::SelectionModel::NeweyI, selection::SelectionModel::NeweyII,
      selection::SelectionModel::NeweyIII};
  std::vector<selection::OutcomeControls> selection_controls{{false, false}, {true, false}, {false, true}, {true, true}};
  int selection_replicates = 500;
  bool selection_cluster_bootstrap = false;
  int snp_restarts = 5;

  int kob_replicates = 500;
  std::vector<std::string> kob_variants{"raw", "pooled"};
  bool kob_swap_reference = false;

  double marginal_share = 0.10;
  int pbot_replicates = 500;
  outcome::PropensityFe pbot_fe = outcome::PropensityFe::CourtYearCovariates;
  bool pbot_diagnostics = true;
  bool rank_validity_year_fe = true;

  bool has_dgp = false;
  dgp::DGPSpec dgp;

  /// Effective settings as section.key -> value, after overrides.
  std::map<std::string, std::string> effective;

  /// FNV-1a of the effective settings (thread count excluded).
  std::uint64_t hash() const;
  std::string canonical_text() const;
  bool wants(const std::string& analysis) const;
};

/// Parses settings given as section.key -> value.
AuditConfig parse_config(const std::map<std::string, std::string>& settings);
std::map<std::string, std::string> read_config_settings(const std::filesystem::path& path);
AuditConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Adds prerequisites and checks the schedule; throws ConfigError.
void schedule_analyses(AuditConfig& config);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 1469598103934665603ULL);

}  // namespace audit
