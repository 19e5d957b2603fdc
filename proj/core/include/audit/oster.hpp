#pragma once

// Coefficient stability under proportional selection on unobservables.

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "audit/estimation.hpp"
#include "audit/sample.hpp"

namespace audit::oster {

struct OsterInputs {
  double beta_uncontrolled = 0.0;
  double beta_controlled = 0.0;
  double r2_uncontrolled = 0.0;
  double r2_controlled = 0.0;

  void validate() const;
};

/// Second moments needed only by the exact solution.
struct OsterMoments {
  double var_outcome = 0.0;
  double var_treatment = 0.0;
  /// Variance of the treatment residual on the controls.
  double var_treatment_resid = 0.0;
};

enum class OsterMode { Restricted, Exact };

struct OsterCell {
  double delta = 0.0;
  double r_max = 0.0;
  double beta = 0.0;
  /// Every real solution in exact mode (beta is the one closest to beta_controlled).
  std::vector<double> roots;
  /// |delta| (r_max - R~) / (R~ - R°) above 0.5: restricted and exact may differ.
  bool variant_sensitive = false;
};

/// beta~ - delta (beta° - beta~)(r_max - R~)/(R~ - R°).
double oster_adjusted_beta(const OsterInputs& in, double delta, double r_max);

/// Real roots of the proportional-selection cubic, mapped to beta.
std::vector<double> oster_exact_roots(const OsterInputs& in, const OsterMoments& m, double delta, double r_max);

OsterCell oster_cell(const OsterInputs& in, double delta, double r_max, OsterMode mode = OsterMode::Restricted,
                     const std::optional<OsterMoments>& moments = std::nullopt);

struct OsterGrid {
  std::vector<double> deltas;
  std::vector<double> rmaxes;
  /// cells[r][d]
  std::vector<std::vector<OsterCell>> cells;
  OsterMode mode = OsterMode::Restricted;
};

std::vector<double> default_deltas();
std::vector<double> default_rmaxes();

OsterGrid oster_grid(const OsterInputs& in, const std::vector<double>& deltas, const std::vector<double>& rmaxes,
                     OsterMode mode = OsterMode::Restricted,
                     const std::optional<OsterMoments>& moments = std::nullopt);

/// Treatment coefficient and R-squared of the two fits.
OsterInputs inputs_from_fits(const estimation::FitResult& uncontrolled, const estimation::FitResult& controlled,
                             std::string_view treatment = "group");

/// Moments for the exact mode; the controls residual comes from `controlled`
/// refitted with the treatment as outcome.
OsterMoments moments_from_sample(const EstimationSample& sample, const estimation::Design& controls,
                                 bool court_year_fe);

/// Real roots of sum c[i] x^i with trailing zero coefficients removed.
std::vector<double> real_polynomial_roots(std::vector<double> c);

}  // namespace audit::oster
