#pragma once

// Synthetic prosecutions from a threshold-crossing release model.
//
// Each case carries observed history X^o (derived from the defendant's own
// earlier synthetic cases exactly as the ingest step derives it), a crime
// type, and unobserved risk X^u.  Latent risk is p = link(eta) with
//
//   eta = intercept + coef_obs . X^o + crime_risk[type] + coef_unobs . X^u.
//
// The assigned judge predicts link(eta + nu), nu ~ N(0, release_noise_sd^2),
// and releases iff the prediction is at most the effective threshold
//
//   t_j + I * (threshold_gap_group1 + category_gap[k]
//              + no_priors_gap * 1{no previous case} - belief_bias_group1),
//
// where t_j = threshold_base + court offset + judge deviation.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "audit/records.hpp"

namespace audit::dgp {

enum class Link { Probit, Logistic };

struct DGPSpec {
  std::size_t n_cases = 50'000;
  int n_judges = 120;
  int n_courts = 20;
  int n_years = 10;
  int start_year = 2008;
  int n_attorneys_per_court = 6;
  double share_group1 = 0.1;
  /// Poisson mean of a defendant's cases beyond the first.
  double mean_extra_cases = 1.5;
  /// Multiplies mean_extra_cases for group-1 defendants.
  double history_scale_group1 = 1.0;

  /// prev_case, n_previous, prev_misconduct, prev_conviction.
  std::array<double, 4> coef_obs{0.15, 0.05, 0.35, 0.10};
  std::vector<double> coef_unobs{0.5};
  double corr_group_unobs = 0.0;
  bool binary_unobs = false;
  double intercept = -0.8;
  /// Crime-type risk shifters are drawn once per type from N(0, sd^2).
  double crime_risk_sd = 0.25;
  Link link = Link::Probit;
  double release_noise_sd = 0.0;

  double threshold_base = 0.5;
  /// Court offsets and judge deviations are uniform on [-spread, spread].
  double court_threshold_spread = 0.05;
  double judge_threshold_spread = 0.05;
  double threshold_gap_group1 = 0.0;
  double belief_bias_group1 = 0.0;
  std::array<double, 9> category_gap{};
  double no_priors_gap = 0.0;
  double court_assignment_skew = 0.0;

  double conviction_base = 0.3;
  double conviction_misconduct = 0.4;
  /// Extra records on separate defendants that ingest must exclude.
  double summons_rate = 0.0;
  double juvenile_rate = 0.0;
  double private_attorney_rate = 0.0;
  /// Share of cases carrying a second, less central crime line.
  double multi_crime_rate = 0.0;

  std::uint64_t seed = 20240101;

  /// Throws ConfigError for out-of-range fields or any judge whose effective
  /// threshold leaves [0, 1].
  void validate() const;
};

struct LatentCase {
  int y_star = 0;
  double p = 0.0;
  double eta = 0.0;
  /// R(1, Z, j) - R(0, Z, j) for this case's Z, judge and prediction noise.
  int d = 0;
  double threshold = 0.0;  ///< t_j for the assigned judge
  int judge = 0;
  int group = 0;
  std::array<double, 4> x_obs{};
  double x_unobs = 0.0;  ///< first unobserved column
};

/// Records in generation order plus the latent truth aligned with them.
/// Contamination records (summons, juvenile, private attorney) and extra
/// crime lines have no latent entry; latent_index maps records to latent.
struct CaseDataset {
  std::vector<CaseRecord> records;
  std::vector<LatentCase> latent;
  std::vector<long> latent_index;  ///< -1 for records without latent truth
};

/// Judge release thresholds t_j (before group offsets), deterministic in the seed.
std::vector<double> judge_thresholds(const DGPSpec& spec);
/// Court of each judge.
int judge_court(const DGPSpec& spec, int judge);
/// Crime-type risk shifters, 2 types per category, type index = 2*(k-1)+s.
std::vector<double> crime_type_risk(const DGPSpec& spec);

CaseDataset generate(const DGPSpec& spec, unsigned threads = 1);

struct DiscriminationEstimate {
  double d = 0.0;
  double se = 0.0;
  double d_given_y0 = 0.0;
  double d_given_y1 = 0.0;
  double share_y1 = 0.0;
};

/// Monte Carlo D = E[E[R(1) - R(0) | Y*]] over n_draws simulated cases.
DiscriminationEstimate true_discrimination(const DGPSpec& spec, std::size_t n_draws, unsigned threads = 1);

/// D computed from the latent truth of a generated dataset.
DiscriminationEstimate dataset_discrimination(const CaseDataset& data);

/// threshold_gap_group1 giving D = target, by bisection on a fixed set of
/// draws (common random numbers keep D monotone in the gap).
double calibrate_threshold_gap(DGPSpec spec, double target, std::size_t n_draws = 200'000, unsigned threads = 1);

/// Flat key/value form used by the configuration file's [dgp] section.
std::map<std::string, std::string> to_kv(const DGPSpec& spec);
/// Applies key/value overrides; unknown keys raise ConfigError.
void apply_kv(DGPSpec& spec, const std::map<std::string, std::string>& kv);

}  // namespace audit::dgp
