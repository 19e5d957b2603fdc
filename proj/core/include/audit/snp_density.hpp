#pragma once

// Binary response with a seminonparametric error density: a squared
// degree-3 Hermite polynomial times the standard normal kernel.
//
//   f(e) = P(e)^2 phi(e) / C,   P(e) = 1 + a1 He1(e) + a2 He2(e) + a3 He3(e),
//   C = 1 + a1^2 + 2 a2^2 + 6 a3^2,
//
// The index enters through the standardized error: with mu and s the mean
// and standard deviation of f, P(release = 1 | x) = F(mu + s x'b).  Location
// and scale then belong to the index coefficients alone, as in probit.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "audit/estimation.hpp"

namespace audit::snp {

using Eigen::VectorXd;

/// Hermite coefficients a0..a3 (a0 = 1) and the density/CDF they define.
class HermiteDensity {
public:
  HermiteDensity() = default;
  explicit HermiteDensity(const std::array<double, 3>& a);

  const std::array<double, 4>& coefficients() const noexcept { return hermite_; }
  double normalization() const noexcept { return norm_; }
  double pdf(double e) const noexcept;
  double cdf(double e) const noexcept;
  /// 1 - cdf(e), accurate in the right tail.
  double survival(double e) const noexcept;
  double mean() const noexcept;
  double variance() const noexcept;
  /// Monomial coefficients of P(e)^2.
  const std::array<double, 7>& squared_poly() const noexcept { return square_; }

private:
  std::array<double, 4> hermite_{1.0, 0.0, 0.0, 0.0};
  std::array<double, 4> mono_{1.0, 0.0, 0.0, 0.0};
  std::array<double, 7> square_{1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  double norm_ = 1.0;
};

/// Integral of poly(e) phi(e) over (-inf, x]; poly in monomial coefficients.
double lower_normal_poly_integral(std::span<const double> poly, double x) noexcept;

struct SnpOptions {
  int restarts = 5;
  std::uint64_t seed = 20240101;
  unsigned threads = 1;
  int max_iterations = 2000;
  /// Keeps the polynomial at a = 0 (a probit fitted by quasi-Newton).
  bool constant_polynomial = false;
  /// Starting values (index coefficients then a1..a3); empty means probit start.
  VectorXd start;
};

struct HermiteDensityFit {
  std::vector<std::string> names;
  VectorXd index_coefficients;
  HermiteDensity density;
  /// Mean and standard deviation of the fitted error density.
  double location = 0.0;
  double scale = 1.0;
  double log_likelihood = 0.0;
  VectorXd linear_index;
  /// Standardized density at each row's index, scale * f(location + scale x'b).
  VectorXd density_values;
  VectorXd probability;
  std::vector<double> restart_log_likelihoods;
  /// Adaptive quadrature of the standardized density over [-12, 12].
  double integral_check = 0.0;

  /// Density of the standardized error (e - location) / scale.
  double standardized_pdf(double z) const noexcept;
  /// Parameter vector in SnpOptions::start layout.
  VectorXd parameters() const;
};

double snp_log_likelihood(const VectorXd& y, const Eigen::MatrixXd& X, const VectorXd& params,
                          VectorXd* gradient = nullptr);

/// Quasi-Newton (BFGS) maximum likelihood from `restarts` starting points,
/// after dropping collinear columns of X (fit.names lists the kept ones),
/// keeping the best converged one.  Throws ConvergenceError carrying the
/// per-restart log-likelihoods when none converges.
HermiteDensityFit snp_density_fit(const VectorXd& y, const estimation::Design& X, const SnpOptions& options = {});

}  // namespace audit::snp
