#pragma once

// Numerical engine shared by every estimator in the toolkit: least squares
// with absorbed fixed effects and clustered sandwich covariance, probit
// maximum likelihood, and Wald tests on either kind of fit.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace audit::estimation {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Regressor matrix with one name per column.
struct Design {
  std::vector<std::string> names;
  MatrixXd matrix;

  Design() = default;
  explicit Design(Index rows) : matrix(rows, 0) {}

  Index rows() const noexcept { return matrix.rows(); }
  Index cols() const noexcept { return matrix.cols(); }

  void add(std::string name, const VectorXd& column);
  void add_intercept() { add("intercept", VectorXd::Ones(rows())); }
  /// Column position or -1.
  Index index_of(std::string_view name) const noexcept;
  bool contains(std::string_view name) const noexcept { return index_of(name) >= 0; }
  VectorXd column(std::string_view name) const;
  Design select_rows(std::span<const Index> rows) const;
  Design select_columns(std::span<const std::string> keep) const;
  Design without_columns(std::span<const std::string> drop) const;
};

enum class CovarianceType { Classical, Robust, Cluster };
enum class CollinearPolicy { Drop, Error };

struct OlsOptions {
  /// Cluster covariance is used whenever a cluster key is supplied.
  CovarianceType covariance = CovarianceType::Classical;
  /// Applies G/(G-1)*(N-1)/(N-K) to clustered and N/(N-K) to robust covariance.
  bool small_sample_correction = true;
  double absorb_tolerance = 1e-10;
  int absorb_max_iterations = 10'000;
  /// A column is collinear when its squared norm after projection on the
  /// earlier kept columns falls below this fraction of its own squared norm.
  double collinearity_tolerance = 1e-9;
  CollinearPolicy collinear = CollinearPolicy::Drop;
};

struct FitResult {
  std::vector<std::string> names;
  VectorXd coefficients;
  MatrixXd vcov;
  VectorXd se;
  double r_squared = 0.0;
  double mean_dependent = 0.0;
  Index n_obs = 0;
  Index n_clusters = 0;
  Index absorbed_fe_count = 0;
  /// Residual degrees of freedom N - K - absorbed levels.
  Index df_residual = 0;
  VectorXd residuals;
  bool converged = true;
  CovarianceType covariance = CovarianceType::Classical;
  std::vector<std::string> dropped;
  std::vector<std::string> warnings;

  Index index_of(std::string_view name) const noexcept;
  /// Throws EstimationError when the coefficient was dropped or never present.
  double coef(std::string_view name) const;
  double stderr_of(std::string_view name) const;
};

/// Sweeps group means of every key out of every column of `data` until the
/// largest change in a sweep is below `tolerance`.  Keys must be dense
/// non-negative codes.  Returns false when max_iterations was reached.
bool absorb_fixed_effects(MatrixXd& data, std::span<const std::vector<int>> keys, double tolerance,
                          int max_iterations);

/// Least squares of y on X after absorbing `fe_keys`, with covariance chosen
/// by the options (clustered on `cluster` when it is non-empty).
///
/// Collinear columns are detected in column order after absorption; under the
/// default policy they are dropped and named in FitResult::dropped.  R-squared
/// is computed against the un-demeaned outcome, so it equals the R-squared of
/// the equivalent explicit-dummy regression.  An exact fit (no residual
/// degrees of freedom) returns its coefficients with a NaN covariance.
FitResult ols_fe(const VectorXd& y, const Design& X, std::span<const std::vector<int>> fe_keys = {},
                 std::span<const int> cluster = {}, const OlsOptions& options = {});

/// Columns of X that survive the sequential rank screen, in order; the rest
/// are appended to `dropped` when it is given.
Design independent_design(const Design& X, double tolerance = 1e-9, std::vector<std::string>* dropped = nullptr);

struct ProbitOptions {
  /// Drop removes collinear columns (named in ProbitFit::dropped) before fitting.
  CollinearPolicy collinear = CollinearPolicy::Drop;
  double score_tolerance = 1e-8;
  double relative_ll_tolerance = 1e-12;
  int max_iterations = 100;
  /// Divergence is declared when |b_j| * max_i |x_ij| exceeds this bound.
  double separation_bound = 50.0;
  /// Optional starting values (same length as the design).
  VectorXd start;
};

struct ProbitFit {
  std::vector<std::string> names;
  VectorXd coefficients;
  MatrixXd vcov;
  VectorXd se;
  double log_likelihood = 0.0;
  VectorXd linear_index;
  VectorXd predicted_probability;
  bool converged = false;
  int iterations = 0;
  double score_max_norm = 0.0;
  std::vector<std::string> dropped;

  Index index_of(std::string_view name) const noexcept;
  double coef(std::string_view name) const;
};

double probit_log_likelihood(const VectorXd& y, const MatrixXd& X, const VectorXd& beta);
VectorXd probit_score(const VectorXd& y, const MatrixXd& X, const VectorXd& beta);
/// Analytic Hessian of the log-likelihood (negative definite at full rank).
MatrixXd probit_hessian(const VectorXd& y, const MatrixXd& X, const VectorXd& beta);

/// Newton-Raphson probit with step halving.  Throws SeparationError when a
/// coefficient diverges or the data are perfectly classified, and
/// ConvergenceError (carrying the log-likelihood trace) when the iteration
/// budget runs out.
ProbitFit probit_fit(const VectorXd& y, const Design& X, const ProbitOptions& options = {});

struct WaldResult {
  double f_statistic = 0.0;
  double p_value = 1.0;
  int df_numerator = 0;
  /// Denominator degrees of freedom; infinity means the chi-square limit.
  double df_denominator = 0.0;
};

/// Joint test that every named coefficient is zero, in F form (W / q).
WaldResult wald_f_test(const FitResult& fit, std::span<const std::string> subset);
WaldResult wald_f_test(const ProbitFit& fit, std::span<const std::string> subset);

/// Dense 0..L-1 codes for arbitrary integer keys, ordered by key value.
std::vector<int> dense_codes(std::span<const int> keys, int* levels = nullptr);

}  // namespace audit::estimation
