#pragma once

// Two-fold Kitagawa-Oaxaca-Blinder decomposition of a group gap.
//
//   ybar1 - ybar0 = (Xbar1 - Xbar0)' b1 + Xbar0' (b1 - b0)        (default)
//   ybar1 - ybar0 = (Xbar1 - Xbar0)' b0 + Xbar1' (b1 - b0)        (swapped)
//
// Gaps are group 1 minus group 0.

#include <optional>
#include <string>
#include <vector>

#include "audit/bootstrap.hpp"
#include "audit/estimation.hpp"
#include "audit/sample.hpp"

namespace audit::kob {

enum class KobOutcome { Release, Misconduct };
enum class Residualize { None, Pooled, GroupWise };

struct KobOptions {
  Residualize residualize = Residualize::None;
  /// Weight the explained term with group-0 coefficients instead.
  bool swap_reference = false;
  bool bootstrap_se = true;
  BootstrapOptions bootstrap;
  bool cluster_bootstrap = false;
};

struct KOBResult {
  KobOutcome outcome = KobOutcome::Release;
  Residualize residualized = Residualize::None;
  bool swapped = false;
  double total_gap = 0.0;
  double explained = 0.0;
  double unexplained = 0.0;
  double se_total = 0.0;
  double se_explained = 0.0;
  double se_unexplained = 0.0;
  std::vector<std::string> names;
  VectorXd mean0, mean1;
  VectorXd beta0, beta1;
  Index n_group0 = 0;
  Index n_group1 = 0;
};

/// Point decomposition on explicit data (intercept is added).  Throws
/// RankDeficiencyError naming the group and the offending columns.
KOBResult kob_decompose(const VectorXd& y, const estimation::Design& controls, const VectorXd& group,
                        bool swap_reference = false);

KOBResult kob(const EstimationSample& sample, KobOutcome outcome, const KobOptions& options = {});

enum class KobPattern { Detected, NotDetected, Indeterminate };

struct KobInterpretation {
  KobPattern pattern = KobPattern::Indeterminate;
  std::string verdict;
  std::string note;
  double release_unexplained_share = 0.0;
  double misconduct_unexplained_share = 0.0;
};

/// Share thresholds are on |unexplained| / (|explained| + |unexplained|).
KobInterpretation kob_interpretation(const KOBResult& release, const KOBResult& misconduct,
                                     double release_share_min = 0.5, double misconduct_share_max = 0.25);

}  // namespace audit::kob
