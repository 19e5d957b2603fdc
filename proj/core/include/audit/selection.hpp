#pragma once

// Selection-corrected outcome regressions: misconduct on the group flag among
// released defendants, with a control function from a release equation that
// also contains the excluded judge and attorney measures.

#include <optional>
#include <string>
#include <vector>

#include "audit/bootstrap.hpp"
#include "audit/estimation.hpp"
#include "audit/sample.hpp"
#include "audit/snp_density.hpp"

namespace audit::selection {

enum class SelectionModel { Heckit, NeweyI, NeweyII, NeweyIII };
std::string model_tag(SelectionModel m);
SelectionModel parse_model(std::string_view tag);

/// Which control blocks enter the outcome equation.
struct OutcomeControls {
  bool individual = false;
  bool court_year_covariates = false;
  std::string label() const;
};

struct SelectionOptions {
  BootstrapOptions bootstrap;
  /// Resample whole court-years instead of rows.
  bool cluster_bootstrap = false;
  bool bootstrap_se = true;
  estimation::ProbitOptions probit;
  snp::SnpOptions snp;
  /// Starts per bootstrap replicate of the density fit (from the full-sample estimate).
  int bootstrap_snp_restarts = 1;
};

struct SelectionFit {
  SelectionModel model = SelectionModel::Heckit;
  OutcomeControls controls;
  std::vector<std::string> first_stage_names;
  std::optional<estimation::ProbitFit> first_stage;
  std::optional<snp::HermiteDensityFit> density;
  /// Control functions on the released rows, in second-stage order.
  estimation::Design control_functions;
  estimation::FitResult second_stage;
  double beta_d = 0.0;
  /// Clustered second-stage SE, ignoring first-stage estimation error.
  double se_second_stage = 0.0;
  /// Bootstrap SE over both steps (NaN when the bootstrap is off).
  double se = 0.0;
  estimation::WaldResult excluded_f;
  std::optional<BootstrapResult> bootstrap;
  double mean_dep = 0.0;
  Index n_released = 0;
};

/// Intercept, group, individual controls, court-year covariates and the
/// excluded judge/attorney measures.
estimation::Design first_stage_design(const EstimationSample& sample);
std::vector<std::string> outcome_control_names(const OutcomeControls& controls);

SelectionFit heckit(const EstimationSample& sample, const OutcomeControls& controls,
                    const SelectionOptions& options = {});
SelectionFit newey_correction(const EstimationSample& sample, SelectionModel model, const OutcomeControls& controls,
                              const SelectionOptions& options = {});
SelectionFit fit_selection(const EstimationSample& sample, SelectionModel model, const OutcomeControls& controls,
                           const SelectionOptions& options = {});

/// Misconduct on group (+ controls) among released rows, without correction.
estimation::FitResult naive_released_ols(const EstimationSample& sample, const OutcomeControls& controls);

struct VerdictEntry {
  std::string label;
  double beta = 0.0;
  double se = 0.0;
  double t_stat = 0.0;
  bool significant = false;
  /// 1 - |beta| / |beta of the first entry|.
  double gap_closure = 0.0;
};

struct OvbVerdict {
  bool ovb_detected = false;
  std::string verdict;  ///< "no-OVB-detected" or "OVB-flagged"
  std::vector<VerdictEntry> chain;
};

/// Chain of estimates ordered from fewest to most controls; the last entry is
/// the fully controlled one and decides the verdict.
OvbVerdict ovb_verdict(const std::vector<std::pair<std::string, std::pair<double, double>>>& estimates,
                       double critical = 1.96);

}  // namespace audit::selection
